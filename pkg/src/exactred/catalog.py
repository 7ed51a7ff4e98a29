"""The statement each check certifies, keyed by check id without its pipeline prefix.

Prefixes: ``P.`` the ambient system, ``A.`` restrict-then-reduce, ``B.`` reduce-then-restrict,
``E.`` the equivalence block.
"""

from __future__ import annotations

ANCHORS = {
    "omega.closed": "omega = -d theta is closed: d omega = 0",
    "omega.nondegenerate": "omega is nondegenerate: |det omega| > tol * |omega|^(2n)",
    "liouville.contraction": "the Liouville field satisfies i_nabla omega = theta",
    "symmetry.invariance": "the action preserves the one-form: L_xi theta = 0",
    "symmetry.hamiltonian": "the Hamiltonian is invariant: xi(h) = 0",
    "symmetry.brackets": "[xi_i, xi_j] = -c^k_ij xi_k for the fundamental fields",
    "symmetry.liouville": "fundamental fields commute with the Liouville field: [xi, nabla] = 0",
    "momentum.equivariance": "xi <J, zeta> + <J, [xi, zeta]> = 0 (infinitesimal Ad*-equivariance)",
    "momentum.regular_value": "the momentum Jacobian is surjective on the level",
    "momentum.restriction": "i^* J_theta = J_eta for the induced contact action",
    "level.value": "h o i = c on the declared level-set chart",
    "level.rank": "the level-set embedding is an immersion",
    "transversality": "the Liouville field is transverse to the level: dh(nabla) != 0",
    "contact.condition": "eta ^ (d eta)^(n-1) is a volume form",
    "contact.reeb": "the Reeb field satisfies i_R eta = 1 and i_R d eta = 0",
    "symmetry.tangency": "fundamental fields are tangent to the level set and lift to it",
    "symmetry.contact_invariance": "the induced action preserves the contact form: L_xi eta = 0",
    "preimage.membership": "J o i lies in the orbit R^x mu at every point of the preimage chart",
    "preimage.rank": "the preimage embedding is an immersion",
    "preimage.scale": "k_mu and the R^x mu preimage are unchanged when mu is replaced by 2 mu",
    "k_mu.tangency": "fields of k_mu are tangent to the R^x mu preimage",
    "quotient.section": "projection o section = identity on the base chart",
    "quotient.fiber_tangency": "the projection kills the k_mu fields (fibers are orbits)",
    "quotient.submersion": "the projection has full row rank",
    "reduce.basic": "the restricted one-form annihilates k_mu: i_xi (j^* theta) = 0",
    "reduce.section_independence": "two sections induce the same reduced one-form",
    "reduce.pullback_theta": "tau^* theta_red = j^* theta",
    "reduce.pullback_omega": "tau^* omega_red = j^* omega",
    "reduce.pullback_h": "tau^* h_red = j^* h",
    "reduce.nondegenerate": "the reduced two-form is nondegenerate",
    "reduce.liouville_pushforward": "tau_* nabla = nabla_red o tau",
    "reduce.liouville_fiber_constant": "tau_* nabla is constant along the fibers of tau",
    "reduce.hamiltonian_pushforward": "tau_* X_h = X_h_red o tau",
    "reduce.pullback_eta": "pi^* eta_red = i^* eta",
    "reduce.pullback_deta": "pi^* d eta_red = i^* d eta",
    "reduce.contact": "the reduced one-form is a contact form",
    "reduce.reeb": "the reduced Reeb field satisfies its defining equations",
    "reduce.reeb_pushforward": "pi_* R = R_red o pi",
    "reduce.reeb_fiber_constant": "pi_* R is constant along the fibers of pi",
    "reduce.dimension": "reduced dimension = preimage dimension - dim k_mu",
    "level.dimension": "level-set dimension = ambient dimension - 1",
    "flow.commutation": "the projected Hamiltonian flow equals the reduced flow: pi o F_t = K_t o pi",
    "reparametrization.angle": "X_h along the level set is parallel to the Reeb field",
    "reparametrization.factor": "the rescaling factor in X_h = f R is nonzero",
    "reparametrization.orbits": "Hamiltonian and Reeb orbits coincide as point sets",
    "kappa.jacobian": "kappa is a local diffeomorphism: det d kappa != 0",
    "kappa.diagram": "i_M o kappa = j into the reduced phase space",
    "kappa.contact_form": "kappa^* eta_red = eta_tilde (observed in examples, not a theorem)",
    "kappa.reeb": "d kappa (R_tilde) = R_red o kappa (observed in examples, not a theorem)",
    "oracle": "a closed-form reference supplied with the scenario matches the computed object",
}


def strip_prefix(check_id: str) -> str:
    head, _, rest = check_id.partition(".")
    return rest if head in ("P", "A", "B", "E") and rest else check_id


def anchor(check_id: str) -> str:
    key = strip_prefix(check_id)
    if key.startswith("oracle."):
        return ANCHORS["oracle"] + f" ({key.split('.', 1)[1]})"
    try:
        return ANCHORS[key]
    except KeyError:
        raise KeyError(f"unknown check id {check_id!r}") from None
