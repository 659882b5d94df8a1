"""Regenerate the bundled synthetic sample CSVs (deterministic)."""

import datetime as dt
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "oscimarket" / "data"


def oscillation(rng, n, period, damping, noise, step=1.0):
    # discretised damped oscillator driven by white noise
    w = 2 * np.pi / period
    rho = np.exp(-damping * step)
    phi1, phi2 = 2 * rho * np.cos(w * step), -rho * rho
    x = np.zeros(n)
    for i in range(2, n):
        x[i] = phi1 * x[i - 1] + phi2 * x[i - 2] + noise * rng.standard_normal()
    return x


def gold(rng):
    n = 626  # weekly closes, twelve years
    days = [dt.date(2001, 1, 5) + dt.timedelta(weeks=i) for i in range(n)]
    trend = np.log(270.0) + np.linspace(0.0, np.log(1700.0 / 270.0), n)
    x = oscillation(rng, n, period=110.0, damping=0.01, noise=0.004)
    price = np.exp(trend + x + 0.0005 * rng.standard_normal(n))
    with open(OUT / "gold_synthetic.csv", "w") as fh:
        fh.write("date,price\n")
        for d, p in zip(days, price):
            fh.write(f"{d.isoformat()},{p:.2f}\n")


def eurusd(rng):
    n = 624  # weekly, twelve years
    days = [dt.date(1999, 1, 4) + dt.timedelta(weeks=i) for i in range(n)]
    ppp = 1.15 + 0.08 * np.linspace(0.0, 1.0, n)
    x = oscillation(rng, n, period=260.0, damping=0.01, noise=0.0006)
    rate = ppp * np.exp(x)
    with open(OUT / "eurusd_ppp_synthetic.csv", "w") as fh:
        fh.write("date,price,fair_value\n")
        for d, r, v in zip(days, rate, ppp):
            fh.write(f"{d.isoformat()},{r:.5f},{v:.5f}\n")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240601)
    gold(rng)
    eurusd(rng)
