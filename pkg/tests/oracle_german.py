"""Hand-written German simulator used as an independent test oracle.

It shares no code with the package: states are plain tuples of Python
values, rules are transcribed by hand from the corpus model text.
``None`` plays Undefined / null.
"""
from collections import deque

CMDS = ("Empty", "ReqS", "ReqE", "Inv", "InvAck", "GntS", "GntE")


def init_states(n, ndata=2):
    out = []
    for d in range(1, ndata + 1):
        out.append(dict(
            cache=tuple(("I", None) for _ in range(n)),
            ch1=tuple(("Empty", None) for _ in range(n)),
            ch2=tuple(("Empty", None) for _ in range(n)),
            ch3=tuple(("Empty", None) for _ in range(n)),
            inv=(False,) * n, shr=(False,) * n,
            exg=False, cmd="Empty", ptr=None, mem=d, aux=d, sharer=None))
    return [freeze(s) for s in out]


KEYS = ("cache", "ch1", "ch2", "ch3", "inv", "shr", "exg", "cmd", "ptr", "mem", "aux", "sharer")


def freeze(s):
    return tuple(s[k] for k in KEYS)


def thaw(t):
    return dict(zip(KEYS, t))


def _set(tup, i, v):
    return tup[:i] + (v,) + tup[i + 1:]


def successors(t, n, ndata=2, buggy=False):
    """[(label, state)] in rule declaration order, agent ascending."""
    s = thaw(t)
    out = []

    def emit(label, **chg):
        u = dict(s)
        u.update(chg)
        out.append((label, freeze(u)))

    for i in range(n):            # SendReqS
        if s["ch1"][i][0] == "Empty" and s["cache"][i][0] == "I":
            emit(f"SendReqS({i+1})", ch1=_set(s["ch1"], i, ("ReqS", s["ch1"][i][1])))
    for i in range(n):            # SendReqE
        if s["ch1"][i][0] == "Empty" and s["cache"][i][0] in ("I", "S"):
            emit(f"SendReqE({i+1})", ch1=_set(s["ch1"], i, ("ReqE", s["ch1"][i][1])))
    for cmd, name in (("ReqS", "RecvReqS"), ("ReqE", "RecvReqE")):
        for i in range(n):
            if s["cmd"] == "Empty" and s["ch1"][i][0] == cmd:
                emit(f"{name}({i+1})", cmd=cmd, ptr=i + 1,
                     ch1=_set(s["ch1"], i, ("Empty", s["ch1"][i][1])), inv=s["shr"])
    for i in range(n):            # SendInv
        if s["ch2"][i][0] == "Empty" and s["inv"][i] and \
                (s["cmd"] == "ReqE" or (s["cmd"] == "ReqS" and s["exg"])):
            emit(f"SendInv({i+1})", ch2=_set(s["ch2"], i, ("Inv", s["ch2"][i][1])),
                 inv=_set(s["inv"], i, False), sharer=i + 1)
    for i in range(n):            # SendInvAck
        if s["ch2"][i][0] == "Inv" and s["ch3"][i][0] == "Empty":
            data3 = s["ch3"][i][1]
            if s["cache"][i][0] == "E":
                data3 = s["cache"][i][1]
            ack = "Empty" if buggy else "InvAck"
            emit(f"SendInvAck({i+1})", ch2=_set(s["ch2"], i, ("Empty", s["ch2"][i][1])),
                 ch3=_set(s["ch3"], i, (ack, data3)), cache=_set(s["cache"], i, ("I", None)))
    for i in range(n):            # RecvInvAck
        if s["ch3"][i][0] == "InvAck" and s["cmd"] != "Empty":
            chg = dict(ch3=_set(s["ch3"], i, ("Empty", s["ch3"][i][1])), shr=_set(s["shr"], i, False))
            if s["sharer"] == i + 1:
                chg["sharer"] = None
            if s["exg"]:
                chg.update(exg=False, mem=s["ch3"][i][1], ch3=_set(s["ch3"], i, ("Empty", None)))
            emit(f"RecvInvAck({i+1})", **chg)
    for i in range(n):            # SendGntS
        if s["cmd"] == "ReqS" and s["ptr"] == i + 1 and s["ch2"][i][0] == "Empty" and not s["exg"]:
            emit(f"SendGntS({i+1})", ch2=_set(s["ch2"], i, ("GntS", s["mem"])),
                 shr=_set(s["shr"], i, True), cmd="Empty", ptr=None)
    for i in range(n):            # SendGntE
        if s["cmd"] == "ReqE" and s["ptr"] == i + 1 and s["ch2"][i][0] == "Empty" and not s["exg"] \
                and not any(s["shr"]):
            emit(f"SendGntE({i+1})", ch2=_set(s["ch2"], i, ("GntE", s["mem"])),
                 shr=tuple(j == i for j in range(n)), exg=True, cmd="Empty", ptr=None)
    for cmd, st, name in (("GntS", "S", "RecvGntS"), ("GntE", "E", "RecvGntE")):
        for i in range(n):
            if s["ch2"][i][0] == cmd:
                emit(f"{name}({i+1})", cache=_set(s["cache"], i, (st, s["ch2"][i][1])),
                     ch2=_set(s["ch2"], i, ("Empty", None)))
    for i in range(n):            # Store
        for d in range(1, ndata + 1):
            if s["cache"][i][0] == "E":
                emit(f"Store({i+1},{d})", cache=_set(s["cache"], i, ("E", d)), aux=d)
    return out


def reachable(n, buggy=False):
    seen = set(init_states(n))
    q = deque(seen)
    while q:
        t = q.popleft()
        for _, u in successors(t, n, buggy=buggy):
            if u not in seen:
                seen.add(u)
                q.append(u)
    return seen


def ctrl_prop(t, n):
    s = thaw(t)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a, b = s["cache"][i][0], s["cache"][j][0]
            if a == "E" and b != "I":
                return False
            if a == "S" and b not in ("I", "S"):
                return False
    return True


def data_prop(t, n):
    s = thaw(t)
    if not s["exg"] and s["mem"] != s["aux"]:
        return False
    return all(c[0] == "I" or c[1] == s["aux"] for c in s["cache"])


def agent_enabled(t, n, i, buggy=False):
    """Some rule instance of agent i (1-based) is enabled."""
    return any(lbl.split("(")[1].split(",")[0].rstrip(")") == str(i)
               for lbl, _ in successors(t, n, buggy=buggy))


def shortest_violation(n, pred, buggy=False):
    """Length of the shortest trace to a state violating ``pred``; None if none."""
    depth = {t: 0 for t in init_states(n)}
    q = deque(depth)
    while q:
        t = q.popleft()
        if not pred(t):
            return depth[t]
        for _, u in successors(t, n, buggy=buggy):
            if u not in depth:
                depth[u] = depth[t] + 1
                q.append(u)
    return None


def permute(t, pn, pd):
    """Apply node permutation ``pn`` and data permutation ``pd`` (dicts on 1-based ids)."""
    s = thaw(t)
    n = len(s["cache"])

    def d(x):
        return None if x is None else pd[x]

    def a(x):
        return None if x is None else pn[x]

    def arr(v, f=lambda x: x):
        out = [None] * n
        for i in range(n):
            out[pn[i + 1] - 1] = f(v[i])
        return tuple(out)
    msg = lambda m: (m[0], d(m[1]))
    s.update(cache=arr(s["cache"], msg), ch1=arr(s["ch1"], msg), ch2=arr(s["ch2"], msg),
             ch3=arr(s["ch3"], msg), inv=arr(s["inv"]), shr=arr(s["shr"]),
             ptr=a(s["ptr"]), sharer=a(s["sharer"]), mem=d(s["mem"]), aux=d(s["aux"]))
    return freeze(s)


def orbit_count(states, n, ndata=2):
    from itertools import permutations
    perms = [(dict(zip(range(1, n + 1), p)), dict(zip(range(1, ndata + 1), q)))
             for p in permutations(range(1, n + 1)) for q in permutations(range(1, ndata + 1))]
    seen, count = set(), 0
    for t in states:
        if t in seen:
            continue
        count += 1
        seen.update(permute(t, pn, pd) for pn, pd in perms)
    return count
