"""Naive reference implementations used as test oracles.

Deliberately written as plain loops, independent of the vectorized code
under test.
"""

import math


def pearson_two_pass(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / (math.sqrt(sxx) * math.sqrt(syy))


def extrema_scan(s):
    out = []
    for i in range(1, len(s) - 1):
        if s[i - 1] < s[i] > s[i + 1]:
            out.append((i, "max"))
        elif s[i - 1] > s[i] < s[i + 1]:
            out.append((i, "min"))
    return out


def softmax_xent(anchor, counterpart, tau, cosine=True):
    """InfoNCE by the textbook formula, no stabilization beyond float64."""
    def norm(v):
        return math.sqrt(sum(a * a for a in v))

    def sim(a, b):
        d = sum(p * q for p, q in zip(a, b))
        return d / (norm(a) * norm(b)) if cosine else d

    B = len(anchor)
    total = 0.0
    for i in range(B):
        num = math.exp(sim(anchor[i], counterpart[i]) / tau)
        den = sum(math.exp(sim(anchor[i], counterpart[j]) / tau) for j in range(B))
        total += -math.log(num / den)
    return total / B


def mae_double_loop(pred, target, mask):
    """pred/target: B x N x D nested lists; mask: B x N booleans."""
    B = len(pred)
    total = 0.0
    for b in range(B):
        acc = 0.0
        count = 0
        for n in range(len(pred[b])):
            if mask[b][n]:
                count += 1
                acc += sum((p - t) ** 2 for p, t in zip(pred[b][n], target[b][n]))
        total += acc / count
    return total / B


def lip_displacement_loop(positions, region):
    T = len(positions)
    acc = 0.0
    for t in range(T - 1):
        m = 0.0
        for v in region:
            m += math.dist(positions[t + 1][v], positions[t][v])
        m /= len(region)
        acc += m * m
    return math.sqrt(acc / (T - 1))


def lve_loop(gt, pred, region, reduction="max"):
    per_frame = []
    for t in range(len(gt)):
        errs = [math.dist(gt[t][v], pred[t][v]) for v in region]
        per_frame.append(max(errs) if reduction == "max" else sum(errs) / len(errs))
    return sum(per_frame) / len(per_frame)
