"""Independent oracles shared by the test modules."""
import numpy as np

from trfl.arch import GraphBuilder


def direct_conv3d(x, w, b, stride, padding):
    """Plain-loop 3D cross-correlation (no stride tricks, no tensordot)."""
    n, cin, t, h, wd = x.shape
    cout, _, kt, kh, kw = w.shape
    st, sh, sw = stride
    pt, ph, pw = padding
    xp = np.zeros((n, cin, t + 2 * pt, h + 2 * ph, wd + 2 * pw), dtype=np.float64)
    xp[:, :, pt:pt + t, ph:ph + h, pw:pw + wd] = x
    to = (t + 2 * pt - kt) // st + 1
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wd + 2 * pw - kw) // sw + 1
    out = np.zeros((n, cout, to, ho, wo))
    for i in range(n):
        for o in range(cout):
            for a in range(to):
                for c in range(ho):
                    for d in range(wo):
                        acc = 0.0 if b is None else float(b[o])
                        for ci in range(cin):
                            for u in range(kt):
                                for v in range(kh):
                                    for z in range(kw):
                                        acc += w[o, ci, u, v, z] * xp[i, ci, a * st + u, c * sh + v,
                                                                         d * sw + z]
                        out[i, o, a, c, d] = acc
    return out


def numeric_grad(f, x, h=1e-4):
    """Central differences of scalar ``f`` with respect to every entry of ``x`` (in place)."""
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


def spaced_values(rng, shape, gap=0.05):
    """Distinct values at least ``gap`` apart and away from zero; keeps
    max-pool and ReLU kinks out of finite-difference reach."""
    n = int(np.prod(shape))
    vals = (np.arange(n) - n / 2 + 0.5) * gap
    return rng.permutation(vals).reshape(shape)


def random_arch(rng, in_channels=None, max_layers=7):
    """Random small valid graph with convs, pools, norms and residual blocks."""
    in_channels = in_channels or int(rng.integers(1, 3))
    g = GraphBuilder(in_channels)
    ch = in_channels
    t_len = int(rng.integers(12, 24))
    hw = int(rng.integers(6, 10))
    dims = [t_len, hw, hw]
    n_layers = int(rng.integers(1, max_layers + 1))
    k = 0

    def shrink(kernel, stride, pad):
        return [(d + 2 * p - kk) // s + 1 for d, kk, s, p in zip(dims, kernel, stride, pad)]

    for _ in range(n_layers):
        k += 1
        choice = rng.choice(["conv", "pool", "block", "bnrelu"], p=[0.45, 0.15, 0.25, 0.15])
        if choice == "conv":
            kernel = tuple(int(v) for v in rng.integers(1, 4, size=3))
            stride = tuple(int(v) for v in rng.integers(1, 3, size=3))
            pad = tuple(int(rng.integers(0, kk)) for kk in kernel)
            new = shrink(kernel, stride, pad)
            if min(new) < 2:
                continue
            out = int(rng.integers(3, 6))
            g.add(f"conv{k}", "conv", kernel=kernel, stride=stride, padding=pad, out_channels=out,
                  bias=bool(rng.integers(0, 2)))
            ch, dims = out, new
        elif choice == "pool":
            kernel = tuple(int(v) for v in rng.integers(1, 4, size=3))
            stride = tuple(int(v) for v in rng.integers(1, 3, size=3))
            pad = tuple(int(rng.integers(0, kk // 2 + 1)) for kk in kernel)
            new = shrink(kernel, stride, pad)
            if min(new) < 2:
                continue
            g.add(f"pool{k}", "maxpool", kernel=kernel, stride=stride, padding=pad)
            dims = new
        elif choice == "bnrelu":
            g.add(f"bn{k}", "batchnorm")
            g.add(f"relu{k}", "relu")
        else:
            kt = int(rng.choice([1, 3]))
            st = int(rng.integers(1, 3))
            same = bool(rng.integers(0, 2))
            tpad = kt // 2 if same else 0
            new = shrink((kt, 3, 3), (st, 1, 1), (tpad, 1, 1))
            if min(new) < 2:
                continue
            x = g.last
            out = int(rng.integers(3, 6))
            g.add(f"b{k}.a", "conv", kernel=(kt, 3, 3), stride=(st, 1, 1), padding=(tpad, 1, 1),
                  out_channels=out)
            g.add(f"b{k}.relu", "relu")
            main = g.add(f"b{k}.c", "conv", kernel=1, out_channels=out)
            if out != ch or st != 1:
                short = g.add(f"b{k}.proj", "conv", inputs=(x,), kernel=1, stride=(st, 1, 1),
                              out_channels=out)
            else:
                short = x
            g.add(f"b{k}.add", "residual_add", inputs=(main, short), crop=not same)
            ch, dims = out, new
    if g.last == "input":
        g.add("conv_last", "conv", kernel=(3, 1, 1), out_channels=3)
    g.add("pool", "global_pool")
    g.add("fc", "fc", out_channels=2)
    return g.build(random=True), (in_channels, t_len, hw, hw)


def impulse_windows(net, arch, input_shape, rng):
    """Frame extent seen by each feature-node window, measured by perturbing
    one input frame at a time and recording which temporal outputs move."""
    c, t, h, w = input_shape
    base = rng.normal(size=(1, c, t, h, w))
    node = arch.feature_node.name
    ref = net.forward(base, until=node)
    affected = [set() for _ in range(ref.shape[2])]
    for frame in range(t):
        for delta in (100.0, -100.0):
            x = base.copy()
            x[:, :, frame] += delta
            out = net.forward(x, until=node)
            moved = np.abs(out - ref).max(axis=(0, 1, 3, 4)) > 1e-9
            for i in np.flatnonzero(moved):
                affected[i].add(frame)
    return [(min(s), max(s)) if s else None for s in affected]
