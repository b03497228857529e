"""Decay of the diagonal disagreement phi(n, n) with an exponential tail fit."""
from cftplab import experiments as X


def main(replicas=2_000_000, seed=5):
    cfg = X.make_config(experiment="mixing", model="rc", p=0.3, q=2, extent="24,24", n_max=8,
                        replicas=replicas, seed=seed)
    res = X.run_experiment(cfg)
    print(" n  phi_hat      s.e.")
    for n, _, _, _, phi, se in res.rows:
        print(f"{n:2d}  {phi:.3e}   {se:.1e}")
    fit = res.summary["fit"]
    print(f"tail fit: rate {fit['rate']:.3f} per step, R^2 {fit['r_squared']:.4f} over {fit['points']} points")


if __name__ == "__main__":
    main()
