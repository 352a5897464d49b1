# %% [markdown]
# # Chain fluctuations against their diffusion limits
#
# A reduced version of the acceptance protocol: rescaled chain samples are
# compared with Euler-Maruyama samples by a two-sample KS distance.

# %%
from cwmdp import ModelParams, ScalingRegime, find_fixed_points
from cwmdp.experiments import clt_compare
from cwmdp.sdelimit import make_diffusion, stationary_constant_report, stationary_density

beta = 1.5
m = find_fixed_points(ModelParams.curie_weiss(beta)).positive_root()
res = clt_compare(ModelParams.curie_weiss(beta), ScalingRegime.clt(0, m), 4000, 1.0, 3000,
                  seed=1, dt=1e-2)
print(f"supercritical: KS {res.ks:.4f} vs threshold {res.threshold:.4f}")

res = clt_compare(ModelParams.curie_weiss(1.0), ScalingRegime.clt(1, 0.0), 4000, 5.0, 3000,
                  seed=2, dt=1e-2)
print(f"critical: KS {res.ks:.4f} vs threshold {res.threshold:.4f}")

# %% [markdown]
# The stationary law of the critical diffusion is proportional to
# exp(-y^4 / 12): flat-bottomed, with negative excess kurtosis.

# %%
rho = stationary_density(make_diffusion(ScalingRegime.clt(1, 0.0), ModelParams.curie_weiss(1.0)))
print("excess kurtosis:", rho.excess_kurtosis())
print(stationary_constant_report(ModelParams.curie_weiss(1.0), ScalingRegime.clt(1, 0.0)).summary())
