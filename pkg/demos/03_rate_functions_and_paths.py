# %% [markdown]
# # Lagrangians, quasi-potentials and optimal paths

# %%
from cwmdp import ModelParams, ScalingRegime
from cwmdp.hamiltonian import (action, lagrangian, make_hamiltonian, optimal_path,
                               quasi_potential, reversed_relaxation)

sub = make_hamiltonian(ScalingRegime.mdp(0, 0.0), ModelParams.curie_weiss(0.5))
crit = make_hamiltonian(ScalingRegime.mdp(1, 0.0), ModelParams.curie_weiss(1.0))
print("L_sub(1, 0) =", lagrangian(sub, 1.0, 0.0))
print("S_sub(x) =", quasi_potential(sub).S)
print("S_crit(x) =", quasi_potential(crit).S)

# %% [markdown]
# The cheapest way to climb from the stable point to a = 1 reverses the
# relaxation flow; its action approaches S(1) as the horizon grows.

# %%
for name, spec, T in (("subcritical", sub, 20.0), ("critical", crit, 10.0)):
    rev = action(spec, reversed_relaxation(spec, 1.0, T))
    path, best = optimal_path(spec, 0.0, 1.0, T, M=512)
    print(f"{name}: reversed relaxation {rev:.6f}, optimal path {best:.6f}, "
          f"S(1) = {quasi_potential(spec).S(1.0):.6f}")
