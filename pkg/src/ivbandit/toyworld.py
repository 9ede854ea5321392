"""Finite discrete world for exact checks of the saddle-point identities.

The population objects of the dual formulation -- the risk
R(f) = (1/2) E[(E[f(X)|Z] - Y)^2], the saddle objective
Psi(f, u) = E[(f(X) - Y) u(Y, Z)] - (1/2) E[u(Y, Z)^2], and the inner
maximizer u*(y, z) = E[f(X)|z] - y -- cannot be tested from samples alone,
so this module evaluates them by exact summation over a finite joint
support: Z ~ z_probs, X | Z=i ~ x_given_z[i], E ~ e_probs independent of
(Z, X), and Y = f_star[X] + E.

The four identities checked by :func:`discrete_world_checks` hold exactly
when (a) E has mean zero and (b) knowing Y adds nothing about X beyond Z,
which is guaranteed whenever each row of ``x_given_z`` is one-hot.  With a
stochastic X|Z table the conditional-expectation operator is a strict
contraction, identity (iii) picks up the gap between ||f - f*||_{L2(P_X)}
and ||E[f - f*|Z]||_{L2(P_Z)}, and the reported violations become a
measurement of that gap rather than rounding noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

_PROB_TOL = 1e-12


def _check_distribution(name: str, probs: np.ndarray):
    if np.any(probs < 0):
        raise InputError(f"{name} has negative entries")
    if abs(float(probs.sum()) - 1.0) > _PROB_TOL:
        raise InputError(f"{name} must sum to 1 within {_PROB_TOL}")


@dataclass(eq=False)
class DiscreteToyWorld:
    """Finite supports and tables defining the joint law of (Z, X, E, Y)."""

    z_probs: np.ndarray  # (nz,)
    x_given_z: np.ndarray  # (nz, nx), each row a distribution over x states
    e_values: np.ndarray  # (ne,)
    e_probs: np.ndarray  # (ne,)
    f_star: np.ndarray  # (nx,) structural values on the x support

    def __post_init__(self):
        self.z_probs = np.asarray(self.z_probs, dtype=np.float64).ravel()
        self.x_given_z = np.atleast_2d(np.asarray(self.x_given_z, dtype=np.float64))
        self.e_values = np.asarray(self.e_values, dtype=np.float64).ravel()
        self.e_probs = np.asarray(self.e_probs, dtype=np.float64).ravel()
        self.f_star = np.asarray(self.f_star, dtype=np.float64).ravel()
        if self.x_given_z.shape[0] != self.z_probs.shape[0]:
            raise InputError("x_given_z needs one row per z state")
        if self.x_given_z.shape[1] != self.f_star.shape[0]:
            raise InputError("f_star needs one value per x state")
        if self.e_values.shape != self.e_probs.shape:
            raise InputError("e_values and e_probs must match")
        _check_distribution("z_probs", self.z_probs)
        _check_distribution("e_probs", self.e_probs)
        for i, row in enumerate(self.x_given_z):
            _check_distribution(f"x_given_z[{i}]", row)

    @property
    def n_z(self) -> int:
        return self.z_probs.shape[0]

    @property
    def n_x(self) -> int:
        return self.f_star.shape[0]

    def x_marginal(self) -> np.ndarray:
        return self.z_probs @ self.x_given_z

    def conditional_mean(self, f_table) -> np.ndarray:
        """E[f(X) | Z=i] for each z state."""
        f = np.asarray(f_table, dtype=np.float64).ravel()
        if f.shape[0] != self.n_x:
            raise InputError("f table must cover the x support")
        return self.x_given_z @ f

    def yz_atoms(self) -> list[tuple[int, float, np.ndarray]]:
        """Support of (Y, Z) as (z index, y value, x-weight vector) atoms.

        The weight vector w satisfies w[x] = P(Z=i, X=x, Y=y); its sum is
        the atom's probability.  Atoms are sorted by (z index, y value),
        the canonical order for user-supplied u tables.
        """
        acc: dict[tuple[int, float], np.ndarray] = {}
        for i, pz in enumerate(self.z_probs):
            for x, px in enumerate(self.x_given_z[i]):
                if pz * px == 0.0:
                    continue
                for e_val, pe in zip(self.e_values, self.e_probs):
                    if pe == 0.0:
                        continue
                    y = float(self.f_star[x] + e_val)
                    w = acc.setdefault((i, y), np.zeros(self.n_x))
                    w[x] += pz * px * pe
        return [(i, y, acc[(i, y)]) for i, y in sorted(acc)]

    def risk(self, f_table) -> float:
        """R(f) = (1/2) E[(E[f(X)|Z] - Y)^2] by direct summation."""
        m_f = self.conditional_mean(f_table)
        total = 0.0
        for i, pz in enumerate(self.z_probs):
            for x, px in enumerate(self.x_given_z[i]):
                for e_val, pe in zip(self.e_values, self.e_probs):
                    y = self.f_star[x] + e_val
                    total += pz * px * pe * (m_f[i] - y) ** 2
        return 0.5 * total

    def psi(self, f_table, u_table) -> float:
        """Psi(f, u) for a u given as values aligned with yz_atoms order."""
        f = np.asarray(f_table, dtype=np.float64).ravel()
        u = np.asarray(u_table, dtype=np.float64).ravel()
        atoms = self.yz_atoms()
        if u.shape[0] != len(atoms):
            raise InputError(f"u table needs one value per atom ({len(atoms)})")
        total = 0.0
        for (_, y, w), u_val in zip(atoms, u):
            prob = w.sum()
            total += (w @ f - prob * y) * u_val - 0.5 * prob * u_val**2
        return total

    def u_star_table(self, f_table) -> np.ndarray:
        """u*(y, z) = E[f(X)|z] - y on the canonical atom order."""
        m_f = self.conditional_mean(f_table)
        return np.array([m_f[i] - y for i, y, _ in self.yz_atoms()])

    def pointwise_maximizer(self, f_table) -> np.ndarray:
        """Unconstrained argmax of Psi(f, .): E[f(X) - Y | y, z] per atom."""
        f = np.asarray(f_table, dtype=np.float64).ravel()
        out = []
        for _, y, w in self.yz_atoms():
            out.append(w @ f / w.sum() - y)
        return np.array(out)


@dataclass(frozen=True)
class IdentityReport:
    """Absolute violations of the four saddle-point identities."""

    maximizer_form: float  # (i)  argmax_u Psi(f,u) vs E[f(X)|z] - y
    risk_equals_max: float  # (ii) R(f) vs max_u Psi(f, u)
    excess_risk: float  # (iii) R(f) - R(f*) vs (1/2)||f - f*||^2_{L2(P_X)}
    dual_distance: float  # (iv) Psi(f,u*) - Psi(f,u) vs (1/2)||u - u*||^2

    @property
    def max_violation(self) -> float:
        return max(
            self.maximizer_form,
            self.risk_equals_max,
            self.excess_risk,
            self.dual_distance,
        )


def discrete_world_checks(
    world: DiscreteToyWorld, f_table, u_table=None
) -> IdentityReport:
    """Evaluate all four identities exactly for a candidate f (and probe u).

    ``u_table`` aligns with ``world.yz_atoms()`` order; when omitted the
    probe is u* shifted by -1, which exercises identity (iv) away from the
    maximizer.
    """
    f = np.asarray(f_table, dtype=np.float64).ravel()
    if f.shape[0] != world.n_x:
        raise InputError("f table must cover the x support")

    u_star = world.u_star_table(f)
    u_bar = world.pointwise_maximizer(f)
    v_maximizer = float(np.max(np.abs(u_bar - u_star)))

    risk_f = world.risk(f)
    v_risk = abs(risk_f - world.psi(f, u_bar))

    risk_star = world.risk(world.f_star)
    diff = f - world.f_star
    l2_sq = float(world.x_marginal() @ diff**2)
    v_excess = abs((risk_f - risk_star) - 0.5 * l2_sq)

    u_probe = u_star - 1.0 if u_table is None else np.asarray(u_table, float).ravel()
    atoms = world.yz_atoms()
    if u_probe.shape[0] != len(atoms):
        raise InputError(f"u table needs one value per atom ({len(atoms)})")
    probs = np.array([w.sum() for _, _, w in atoms])
    dist_sq = float(probs @ (u_probe - u_star) ** 2)
    v_dual = abs(0.5 * dist_sq - (world.psi(f, u_star) - world.psi(f, u_probe)))

    return IdentityReport(
        maximizer_form=v_maximizer,
        risk_equals_max=v_risk,
        excess_risk=v_excess,
        dual_distance=v_dual,
    )
