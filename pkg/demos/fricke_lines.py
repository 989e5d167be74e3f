"""Fricke cubic: the 24 lines, smoothness and a Jimbo-parameterised conic."""
import numpy as np

from qmano.fricke import (
    ThetaParams,
    fricke_eval,
    jimbo_param,
    lines_24,
    orbit,
    smoothness,
)

tp = ThetaParams((1.3 + 0.2j, 0.7 - 0.5j, 1.1j, 0.9 + 0.4j))
lines = lines_24(tp)
print(len(lines), "lines")
worst = max(abs(fricke_eval(L.point(t), tp.a)[0]) for L in lines for t in (0.0, 1.0, -2 + 1j))
print("largest |F| on sampled line points:", worst)
print("smooth:", smoothness(tp).smooth)

X1 = 0.4 - 0.3j
for s in (0.5, 1.0 + 1j, -2.0):
    X = (*jimbo_param(tp.a, X1, s), X1)  # (X0, Xt, X1)
    print("s =", s, "|F| =", abs(fricke_eval(X, tp.a)[0]))

X = lines[0].point(0.25)
for step in orbit(X, tp.a, 4):
    print(np.round(step, 6))
