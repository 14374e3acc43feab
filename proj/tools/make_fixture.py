#!/usr/bin/env python3
"""Generate the bundled fixture datasets.

fixtures/sample     recorded-source stand-ins for a full pipeline run: 303 assets
                    in the market-cap feed whose weekly top-100 union over the
                    105 sample weeks is exactly 253 non-stablecoins.
fixtures/synthetic3 a 3-factor excess-return panel for select-k.

Usage: python3 tools/make_fixture.py [--out fixtures]
"""

import argparse
import datetime as dt
from pathlib import Path

import numpy as np

SAMPLE_START = dt.date(2023, 1, 1)  # a Sunday
SAMPLE_WEEKS = 105
PRE_WEEKS = 8  # warm-up for momentum, differencing and the first return

N_CORE = 60
N_ROTATING = 193
N_SMALL = 47
STABLECOINS = ["USDT", "USDC", "DAI"]
ACTIVE_SLOTS = 40

EQUITY = ["R_S", "SMB_S", "HML_S", "RMW_S", "CMA_S", "Mom_S"]
INDUSTRIES = ["Softw", "Fin", "Banks", "Chips", "Insur", "Util", "RlEst", "Gold"]


def sundays():
    first = SAMPLE_START - dt.timedelta(weeks=PRE_WEEKS)
    return [first + dt.timedelta(weeks=w) for w in range(PRE_WEEKS + SAMPLE_WEEKS)]


def fmt(x):
    return f"{x:.10g}"


def write_long(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write("date,entity,value,unit\n")
        for d, e, v, u in rows:
            f.write(f"{d.isoformat()},{e},{fmt(v)},{u}\n")


def sample_dataset(out: Path, seed: int = 20250101):
    rng = np.random.default_rng(seed)
    weeks = sundays()
    W = len(weeks)
    core = [f"C{i:03d}" for i in range(N_CORE)]
    rot = [f"R{i:03d}" for i in range(N_ROTATING)]
    small = [f"S{i:03d}" for i in range(N_SMALL)]
    ids = core + rot + small
    N = len(ids)

    # Which rotating assets sit in the top 100 in each sample week.
    active = np.zeros((W, N_ROTATING), dtype=bool)
    for w in range(SAMPLE_WEEKS):
        for s in range(ACTIVE_SLOTS):
            active[PRE_WEEKS + w, (2 * w + s) % N_ROTATING] = True

    # Listing windows: core and small assets trade throughout; rotating assets
    # list ahead of their first top-100 week and some delist afterwards.
    listed = np.ones((W, N), dtype=bool)
    for j in range(N_ROTATING):
        on = np.flatnonzero(active[:, j])
        first = max(0, on[0] - int(rng.integers(3, 15)))
        last = W - 1
        if j % 5 == 0:
            last = min(W - 1, on[-1] + int(rng.integers(3, 12)))
        listed[:first, N_CORE + j] = False
        listed[last + 1:, N_CORE + j] = False

    # Weekly log returns from three latent drivers plus noise.
    f = np.column_stack([
        rng.normal(0.012, 0.06, W),
        rng.normal(0.0, 0.04, W),
        rng.normal(0.0, 0.03, W),
    ])
    beta = np.column_stack([
        rng.normal(1.0, 0.3, N),
        rng.normal(0.0, 1.0, N),
        rng.normal(0.0, 1.0, N),
    ])
    noise_sd = np.where(np.arange(N) < N_CORE, 0.04, 0.08)
    logret = f @ beta.T + rng.normal(0, 1, (W, N)) * noise_sd
    logret = np.clip(logret, -0.9, 0.9)
    price = np.exp(np.cumsum(logret, axis=0)) * rng.uniform(0.05, 500, N)

    # Cap bands keep the ranking deterministic: core > active rotating > rest.
    caps = np.empty((W, N))
    for i in range(N):
        if i < N_CORE:
            base = 5e10 * 0.93 ** i
        elif i < N_CORE + N_ROTATING:
            base = 2e8
        else:
            base = 1e7
        caps[:, i] = base * np.exp(rng.normal(0, 0.05, W))
    for j in range(N_ROTATING):
        col = N_CORE + j
        caps[active[:, j], col] = 1.5e9 * np.exp(rng.normal(0, 0.2, active[:, j].sum()))
    # Core assets stay above every active rotating asset.
    caps[:, :N_CORE] = np.maximum(caps[:, :N_CORE], 2e10)

    price_rows, cap_rows, tvl_rows = [], [], []
    has_tvl = np.zeros(N, dtype=bool)
    has_tvl[: N_CORE] = True
    has_tvl[N_CORE:N_CORE + N_ROTATING:3] = True
    tvl_ratio = rng.uniform(0.01, 0.6, N)
    for w, d in enumerate(weeks):
        for i, a in enumerate(ids):
            if not listed[w, i]:
                continue
            # Prices are stamped on a weekday; weeks close on Sunday.
            stamp = d - dt.timedelta(days=int((i + w) % 3))
            price_rows.append((stamp, a, price[w, i], "usd"))
            cap_rows.append((d, a, caps[w, i], "usd"))
            if has_tvl[i]:
                tvl = caps[w, i] * tvl_ratio[i] * np.exp(rng.normal(0, 0.15))
                tvl_rows.append((d, a, tvl, "usd"))
        for k, s in enumerate(STABLECOINS):
            price_rows.append((d, s, 1.0 + rng.normal(0, 1e-3), "usd"))
            cap_rows.append((d, s, 9e10 / (k + 1) * np.exp(rng.normal(0, 0.01)), "usd"))

    # Daily sentiment and volatility indices.
    first_day = weeks[0] - dt.timedelta(days=6)
    days = [first_day + dt.timedelta(days=k) for k in range((weeks[-1] - first_day).days + 1)]
    D = len(days)

    def bounded_walk(start, lo, hi, step):
        x = np.empty(D)
        x[0] = start
        for t in range(1, D):
            x[t] = min(hi, max(lo, x[t - 1] + rng.normal(0, step)))
        return x

    alt = bounded_walk(40, 8, 95, 3.0)
    fg = bounded_walk(55, 10, 90, 1.5)
    cvx = bounded_walk(60, 35, 110, 1.2)
    alt_rows = [(d, "altseason", v, "index_level") for d, v in zip(days, alt)]
    fg_rows = [(d, "fear_greed", v, "index_level") for d, v in zip(days, fg)]
    cvx_rows = [(d, "cvx", v, "index_level") for d, v in zip(days, cvx)]

    # Sparse hack events in USD.
    hack_days = sorted(rng.choice(D, size=70, replace=False))
    hack_rows = [(days[k], "hack", float(np.exp(rng.normal(16.5, 1.5))), "usd") for k in hack_days]

    # Weekly equity factors and industries in percent, stamped on Fridays.
    eq_rows, ind_rows = [], []
    mkt = rng.normal(0.3, 1.9, W)
    for w, d in enumerate(weeks):
        friday = d - dt.timedelta(days=2)
        eq_rows.append((friday, "R_S", mkt[w], "percent"))
        for name, sd in zip(EQUITY[1:], [1.7, 1.45, 1.1, 0.95, 1.8]):
            eq_rows.append((friday, name, rng.normal(0, sd) - 0.1 * mkt[w], "percent"))
        eq_rows.append((friday, "RF", 0.09 + 0.005 * np.sin(w / 10), "percent"))
        for name in INDUSTRIES:
            ind_rows.append((friday, name, 0.9 * mkt[w] + rng.normal(0.05, 1.5), "percent"))

    raw = out / "raw"
    write_long(raw / "prices.csv", price_rows)
    write_long(raw / "market_caps.csv", cap_rows)
    write_long(raw / "tvl.csv", tvl_rows)
    write_long(raw / "hacks_usd.csv", hack_rows)
    write_long(raw / "altseason.csv", alt_rows)
    write_long(raw / "fear_greed.csv", fg_rows)
    write_long(raw / "cvx.csv", cvx_rows)
    write_long(raw / "equity_factors.csv", eq_rows)
    write_long(raw / "equity_industries.csv", ind_rows)

    cfg = f"""# Bundled fixture run. Paths are relative to this file.
cache_dir = cache
work_dir = out
offline = false
start = {SAMPLE_START.isoformat()}
end = {(SAMPLE_START + dt.timedelta(weeks=SAMPLE_WEEKS - 1)).isoformat()}
universe_size = 100
stablecoins = {",".join(STABLECOINS)}
risk_free_entity = RF

source.prices = raw/prices.csv
source.market_caps = raw/market_caps.csv
source.tvl = raw/tvl.csv
source.hacks_usd = raw/hacks_usd.csv
source.altseason_index = raw/altseason.csv
source.fear_greed_index = raw/fear_greed.csv
source.cvx_level = raw/cvx.csv
source.equity_factors = raw/equity_factors.csv
source.equity_industries = raw/equity_industries.csv

k = auto
kmax = 8

bootstrap.reps = 60
bootstrap.block = 8
bootstrap.seed = 42
bootstrap.workers = 2
"""
    (out / "run.cfg").write_text(cfg)


def synthetic3(out: Path, seed: int = 7, N: int = 120, T: int = 105, K: int = 3):
    rng = np.random.default_rng(seed)
    v = rng.normal(0, 1, (T, K))
    beta = rng.normal(0, 1, (N, K))
    r = (v + np.array([0.3, -0.2, 0.25])) @ beta.T + rng.normal(0, 1, (T, N)) * np.sqrt(K / 2.0)
    miss = rng.random((T, N)) < 0.1
    for i in range(N):
        if (~miss[:, i]).sum() < 2:
            miss[:2, i] = False
    weeks = [SAMPLE_START + dt.timedelta(weeks=w) for w in range(T)]
    ids = [f"A{i}" for i in range(N)]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "panel_returns.csv", "w") as f:
        f.write("date," + ",".join(ids) + "\n")
        for t, d in enumerate(weeks):
            cells = ["" if miss[t, i] else fmt(r[t, i]) for i in range(N)]
            f.write(d.isoformat() + "," + ",".join(cells) + "\n")
    with open(out / "panel_caps.csv", "w") as f:
        f.write("date," + ",".join(ids) + "\n")
        for t, d in enumerate(weeks):
            f.write(d.isoformat() + "," + ",".join([""] * N) + "\n")
    (out / "run.cfg").write_text(
        "# Synthetic 3-factor panel for factor-count selection.\n"
        "work_dir = .\n"
        f"start = {weeks[0].isoformat()}\n"
        f"end = {weeks[-1].isoformat()}\n"
        "kmax = 15\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    sample_dataset(out / "sample")
    synthetic3(out / "synthetic3")


if __name__ == "__main__":
    main()
