"""RIPPER rule induction: IREP* growth and pruning, MDL stopping, rule optimization.

Classes are handled from rarest to most frequent; each ruleset separates its
class from the classes still remaining, and the most frequent class becomes
the default rule. Conditions are ``[op, feature, value]`` with ``op`` one of
``"eq"`` (nominal), ``"le"`` or ``"ge"`` (numeric; missing never satisfies).
"""

from __future__ import annotations

import math

import numpy as np

from ._encode import Encoded
from .base import Learner, register

DEFAULTS = {"optimization_runs": 2}
MDL_SLACK = 64.0
THEORY_WEIGHT = 0.5
MIN_GAIN = 1e-12


def _log2(x: float) -> float:
    return math.log2(x) if x > 0 else 0.0


def subset_dl(t: float, k: float, p: float) -> float:
    """Bits to pick ``k`` of ``t`` elements when each is picked with probability ``p``."""
    bits = 0.0
    if k > 0:
        bits -= k * _log2(p) if p > 0 else 0.0
    if t - k > 0:
        bits -= (t - k) * _log2(1 - p) if p < 1 else 0.0
    return bits


def theory_dl(rule: list, n_all_conds: int) -> float:
    k = len(rule)
    if k == 0:
        return 0.0
    bits = math.log2(k)
    if k > 1:
        bits += 2 * _log2(bits)
    bits += subset_dl(n_all_conds, k, k / n_all_conds)
    return THEORY_WEIGHT * bits


def data_dl(exp_fp_over_err: float, cover: int, uncover: int, fp: int, fn: int) -> float:
    bits = math.log2(cover + uncover + 1)
    if cover > uncover:
        exp_err = exp_fp_over_err * (fp + fn)
        bits += subset_dl(cover, fp, exp_err / cover)
        bits += subset_dl(uncover, fn, fn / uncover) if uncover > 0 else 0.0
    else:
        exp_err = (1 - exp_fp_over_err) * (fp + fn)
        bits += subset_dl(cover, fp, fp / cover) if cover > 0 else 0.0
        bits += subset_dl(uncover, fn, exp_err / uncover) if uncover > 0 else 0.0
    return bits


class _Context:
    """Data and bookkeeping for learning one class's ruleset."""

    def __init__(self, data: Encoded, pos: np.ndarray, neg: np.ndarray, target: int,
                 rng: np.random.Generator, n_all_conds: int):
        self.data = data
        self.pos = pos
        self.neg = neg
        self.target = target
        self.rng = rng
        self.n_all_conds = max(n_all_conds, 1)
        self.exp_fp = len(neg) / max(len(pos) + len(neg), 1)

    def cond_mask(self, cond, rows: np.ndarray) -> np.ndarray:
        op, f, v = cond
        d = self.data
        if op == "eq":
            return d.Xn[rows, d.feat_pos[f]] == v
        x = d.Xc[rows, d.feat_pos[f]]
        with np.errstate(invalid="ignore"):
            return x <= v if op == "le" else x >= v

    def rule_mask(self, rule, rows: np.ndarray) -> np.ndarray:
        m = np.ones(len(rows), dtype=bool)
        for cond in rule:
            if not m.any():
                break
            m &= self.cond_mask(cond, rows)
        return m

    def rules_mask(self, rules, rows: np.ndarray) -> np.ndarray:
        m = np.zeros(len(rows), dtype=bool)
        for rule in rules:
            m |= self.rule_mask(rule, rows)
        return m

    def ruleset_dl(self, rules) -> float:
        cp = self.rules_mask(rules, self.pos)
        cn = self.rules_mask(rules, self.neg)
        tp, fp = int(cp.sum()), int(cn.sum())
        fn = len(self.pos) - tp
        cover = tp + fp
        uncover = len(self.pos) + len(self.neg) - cover
        theory = sum(theory_dl(r, self.n_all_conds) for r in rules)
        return theory + data_dl(self.exp_fp, cover, uncover, fp, fn)

    def split(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        perm = rows[self.rng.permutation(len(rows))]
        n_grow = math.ceil(2 * len(rows) / 3)
        return perm[:n_grow], perm[n_grow:]

    # growing ------------------------------------------------------------

    def best_condition(self, rows: np.ndarray, is_pos: np.ndarray):
        d = self.data
        p0 = int(is_pos.sum())
        base = math.log2(p0 / len(rows))
        best, best_gain = None, MIN_GAIN
        for f in range(d.n_features):
            if d.feat_kind[f] == 0:
                codes = d.Xn[rows, d.feat_pos[f]]
                ok = codes >= 0
                card = int(d.feat_card[f])
                tc = np.bincount(codes[ok], minlength=card)
                pc = np.bincount(codes[ok & is_pos], minlength=card)
                with np.errstate(divide="ignore", invalid="ignore"):
                    gain = np.where(pc > 0, pc * (np.log2(pc / np.maximum(tc, 1)) - base), -np.inf)
                i = int(np.argmax(gain))
                if gain[i] > best_gain:
                    best, best_gain = ["eq", f, i], float(gain[i])
            else:
                x = d.Xc[rows, d.feat_pos[f]]
                known = ~np.isnan(x)
                xs = x[known]
                if len(xs) < 2:
                    continue
                order = np.argsort(xs, kind="stable")
                xs = xs[order]
                ps = is_pos[known][order].astype(np.int64)
                cum = np.cumsum(ps)
                cut = np.flatnonzero(xs[:-1] < xs[1:])
                if len(cut) == 0:
                    continue
                t_le = cut + 1
                p_le = cum[cut]
                t_ge = len(xs) - t_le
                p_ge = cum[-1] - p_le
                with np.errstate(divide="ignore", invalid="ignore"):
                    g_le = np.where(p_le > 0, p_le * (np.log2(p_le / t_le) - base), -np.inf)
                    g_ge = np.where(p_ge > 0, p_ge * (np.log2(p_ge / t_ge) - base), -np.inf)
                for op, g in (("le", g_le), ("ge", g_ge)):
                    i = int(np.argmax(g))
                    if g[i] > best_gain:
                        thr = float((xs[cut[i]] + xs[cut[i] + 1]) / 2)
                        best, best_gain = [op, f, thr], float(g[i])
        return best

    def grow_rule(self, pos: np.ndarray, neg: np.ndarray, start=()) -> list:
        rule = [list(c) for c in start]
        rows = np.concatenate([pos, neg])
        is_pos = np.concatenate([np.ones(len(pos), bool), np.zeros(len(neg), bool)])
        m = self.rule_mask(rule, rows)
        rows, is_pos = rows[m], is_pos[m]
        while len(rows) and is_pos.any() and not is_pos.all():
            cond = self.best_condition(rows, is_pos)
            if cond is None:
                break
            rule.append(cond)
            m = self.cond_mask(cond, rows)
            rows, is_pos = rows[m], is_pos[m]
        return rule

    # pruning -------------------------------------------------------------

    def prune_rule(self, rule: list, pos: np.ndarray, neg: np.ndarray) -> list:
        """Keep the prefix maximizing (p - n) / (p + n) on the prune rows; ties keep the shorter."""
        if len(pos) + len(neg) == 0 or len(rule) <= 1:
            return rule
        best_len, best_v = len(rule), -np.inf
        for L in range(1, len(rule) + 1):
            p = int(self.rule_mask(rule[:L], pos).sum())
            n = int(self.rule_mask(rule[:L], neg).sum())
            v = (p - n) / (p + n) if p + n else -np.inf
            if v > best_v + 1e-12:
                best_len, best_v = L, v
        return rule[:best_len]

    def prune_in_context(self, rule: list, later: list, pos: np.ndarray, neg: np.ndarray) -> list:
        """Prefix maximizing the accuracy of ``[prefix] + later`` on the prune rows."""
        total = len(pos) + len(neg)
        if total == 0 or len(rule) <= 1:
            return rule
        lp = self.rules_mask(later, pos)
        ln = self.rules_mask(later, neg)
        best_len, best_acc = len(rule), -1.0
        for L in range(1, len(rule) + 1):
            tp = int((lp | self.rule_mask(rule[:L], pos)).sum())
            fp = int((ln | self.rule_mask(rule[:L], neg)).sum())
            acc = (tp + len(neg) - fp) / total
            if acc > best_acc + 1e-12:
                best_len, best_acc = L, acc
        return rule[:best_len]

    # IREP* / optimization ------------------------------------------------

    def irep_star(self, rules: list) -> list:
        rules = [list(r) for r in rules]
        covered_p = self.rules_mask(rules, self.pos)
        covered_n = self.rules_mask(rules, self.neg)
        pos = self.pos[~covered_p]
        neg = self.neg[~covered_n]
        dl_min = self.ruleset_dl(rules)
        while len(pos):
            gp, pp = self.split(pos)
            gn, pn = self.split(neg)
            rule = self.grow_rule(gp, gn)
            if not rule:
                break
            rule = self.prune_rule(rule, pp, pn)
            p = int(self.rule_mask(rule, pp).sum())
            n = int(self.rule_mask(rule, pn).sum())
            if p + n == 0:
                p = int(self.rule_mask(rule, gp).sum())
                n = int(self.rule_mask(rule, gn).sum())
            if p + n == 0 or n / (p + n) > 0.5:
                break
            rules.append(rule)
            dl = self.ruleset_dl(rules)
            if dl > dl_min + MDL_SLACK:
                rules.pop()
                break
            dl_min = min(dl_min, dl)
            mp = self.rule_mask(rule, pos)
            mn = self.rule_mask(rule, neg)
            if not mp.any():
                break
            pos, neg = pos[~mp], neg[~mn]
        return rules

    def optimize(self, rules: list) -> list:
        rules = [list(r) for r in rules]
        for i in range(len(rules)):
            earlier = rules[:i]
            later = rules[i + 1:]
            pos = self.pos[~self.rules_mask(earlier, self.pos)]
            neg = self.neg[~self.rules_mask(earlier, self.neg)]
            if len(pos) == 0:
                continue
            gp, pp = self.split(pos)
            gn, pn = self.split(neg)
            variants = [rules[i]]
            replacement = self.grow_rule(gp, gn)
            if replacement:
                variants.append(self.prune_in_context(replacement, later, pp, pn))
            revision = self.grow_rule(gp, gn, start=rules[i])
            variants.append(self.prune_in_context(revision, later, pp, pn))
            best, best_dl = rules[i], np.inf
            for v in variants:
                dl = self.ruleset_dl(earlier + [v] + later)
                if dl < best_dl - 1e-9:
                    best, best_dl = v, dl
            rules[i] = best
        return rules

    def delete_rules(self, rules: list) -> list:
        rules = [list(r) for r in rules]
        for i in range(len(rules) - 1, -1, -1):
            without = rules[:i] + rules[i + 1:]
            if self.ruleset_dl(without) < self.ruleset_dl(rules):
                rules = without
        return rules


def _n_all_conditions(data: Encoded) -> int:
    total = 0
    for f in range(data.n_features):
        if data.feat_kind[f] == 0:
            total += int(data.feat_card[f])
        else:
            x = data.numeric_column(f)
            total += 2 * len(np.unique(x[~np.isnan(x)]))
    return total


def learn_class(ctx: _Context, runs: int) -> list:
    rules = ctx.irep_star([])
    for _ in range(runs):
        rules = ctx.optimize(rules)
        rules = ctx.irep_star(rules)
    return ctx.delete_rules(rules)


def first_fire(rules: list, data: Encoded) -> np.ndarray:
    """Index of the first rule covering each row; ``len(rules)`` means the default."""
    n = data.n_rows
    rows = np.arange(n)
    out = np.full(n, len(rules), dtype=np.int64)
    ctx = _Context(data, rows, rows, 0, np.random.default_rng(0), 1)
    open_ = np.ones(n, dtype=bool)
    for i, rule in enumerate(rules):
        idx = np.flatnonzero(open_)
        if len(idx) == 0:
            break
        hit = idx[ctx.rule_mask(rule["conditions"], idx)]
        out[hit] = i
        open_[hit] = False
    return out


def fit(data: Encoded, hp: dict, seed: int) -> dict:
    runs = hp["optimization_runs"]
    if runs < 0:
        raise ValueError("optimization_runs must be >= 0")
    C = data.n_classes
    counts = np.bincount(data.y, minlength=C)
    present = [c for c in range(C) if counts[c] > 0]
    order = sorted(present, key=lambda c: (counts[c], c))
    default = order[-1]
    rng = np.random.default_rng(seed)
    n_all = _n_all_conditions(data)
    remaining = np.arange(data.n_rows)
    rules = []
    for c in order[:-1]:
        ys = data.y[remaining]
        pos, neg = remaining[ys == c], remaining[ys != c]
        ctx = _Context(data, pos, neg, c, rng, n_all)
        for r in learn_class(ctx, runs):
            rules.append({"conditions": r, "class": int(c)})
        remaining = neg
    fired = first_fire(rules, data)
    dists = np.zeros((len(rules) + 1, C), dtype=np.int64)
    np.add.at(dists, (fired, data.y), 1)
    for i, r in enumerate(rules):
        r["counts"] = dists[i].tolist()
    return {"rules": rules, "default": int(default), "default_counts": dists[-1].tolist()}


def proba(params: dict, data: Encoded) -> np.ndarray:
    rules = params["rules"]
    C = data.n_classes
    table = np.zeros((len(rules) + 1, C))
    for i, r in enumerate(rules + [{"counts": params["default_counts"], "class": params["default"]}]):
        counts = np.asarray(r["counts"], dtype=np.float64)
        if counts.sum() > 0:
            table[i] = counts / counts.sum()
        else:
            table[i, r["class"]] = 1.0
    return table[first_fire(rules, data)]


def describe(params: dict, encoder) -> list[str]:
    """Readable rule list, e.g. ``(color = red) => yes``."""
    names = encoder.names
    labels = encoder.class_labels
    lines = []
    for r in params["rules"]:
        parts = []
        for op, f, v in r["conditions"]:
            name = names[f]
            if op == "eq":
                parts.append(f"({name} = {encoder.vocabs[name][v]})")
            else:
                parts.append(f"({name} {'<=' if op == 'le' else '>='} {v:g})")
        lines.append(" and ".join(parts) + f" => {labels[r['class']]}")
    lines.append(f"=> {labels[params['default']]}")
    return lines


LEARNER = register(Learner("ripper", fit, proba, DEFAULTS))
