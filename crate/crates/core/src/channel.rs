//! End-to-end channel `H` (with `v_R = H v_T`) at every level of modelling
//! fidelity, and the block mappings between Z-, Y- and S-parameter forms.
//!
//! Fidelity levels, from exact to approximate:
//!
//! | level                   | assumption                                        |
//! |-------------------------|---------------------------------------------------|
//! | `General`               | none                                              |
//! | `Unilateral`            | TI, TR, IR blocks zero                            |
//! | `MatchedWithCoupling`   | + antennas matched to `z0`, sources/loads `= z0`  |
//! | `Matched`               | + no mutual coupling at the RIS                   |
//! | `WidelyUsed`            | `H = H_RT + H_RI Θ H_IT` with exact `H_RT`        |
//! | `WidelyUsedNeumann`     | same, with `H_RT ≈ Z_RT / 2Z₀`                    |

use serde::{Deserialize, Serialize};

use crate::architectures::{ArchitectureSpec, RisConfiguration, RisParam};
use crate::error::{Error, Result};
use crate::framework::{self, MiddleTermination, Response, TerminationProblem};
use crate::linalg::{self, identity, real, CMatrix, CVector};
use crate::netparams::{NetworkMatrix, ParamKind, Port, PortPartition, Termination, TerminationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    General,
    Unilateral,
    MatchedWithCoupling,
    Matched,
    WidelyUsed,
    WidelyUsedNeumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub h: CMatrix,
    pub fidelity: Fidelity,
}

/// The three blocks of one parameter kind that carry the link:
/// direct (RT), RIS-to-receiver (RI) and transmitter-to-RIS (IT).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBlocks {
    pub rt: CMatrix,
    pub ri: CMatrix,
    pub it: CMatrix,
}

impl LinkBlocks {
    pub fn from_network(net: &NetworkMatrix) -> Self {
        Self {
            rt: net.block(Port::R, Port::T),
            ri: net.block(Port::R, Port::I),
            it: net.block(Port::I, Port::T),
        }
    }

    pub fn n_i(&self) -> usize {
        self.it.nrows()
    }

    fn check(&self) -> Result<()> {
        let ok = self.ri.nrows() == self.rt.nrows()
            && self.it.ncols() == self.rt.ncols()
            && self.ri.ncols() == self.it.nrows();
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "inconsistent link blocks: RT {:?}, RI {:?}, IT {:?}",
                self.rt.shape(),
                self.ri.shape(),
                self.it.shape()
            )))
        }
    }
}

/// Y- and S-form link blocks obtained from Z-form ones.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedBlocks {
    pub y: LinkBlocks,
    pub s: LinkBlocks,
}

/// Single entry point for every fidelity level.
///
/// `General` and `Unilateral` use the full network and terminations in the
/// parameter kind `kind` (the network is converted when needed). The matched
/// levels read the RT, RI, IT and (with coupling) II blocks and the RIS
/// network, assuming matched antennas, sources and loads. The widely-used
/// levels are always evaluated in S form and ignore `kind`.
pub fn evaluate(
    fidelity: Fidelity,
    kind: ParamKind,
    net: &NetworkMatrix,
    terms: &TerminationSet,
) -> Result<ChannelMatrix> {
    let ris = RisConfiguration::new(
        match &terms.z_i {
            Termination::Impedance(z) => RisParam::Impedance(z.clone()),
            Termination::OpenCircuit { ports } => RisParam::Admittance(CMatrix::zeros(*ports, *ports)),
        },
        ArchitectureSpec::fully(terms.z_i.ports()),
        terms.z0,
    );
    match fidelity {
        Fidelity::General => general_channel(kind, &net.to_kind(kind)?, terms),
        Fidelity::Unilateral => unilateral_channel(kind, &net.to_kind(kind)?, terms),
        Fidelity::MatchedWithCoupling => {
            let n = net.to_kind(kind)?;
            let coupling = n.block(Port::I, Port::I);
            matched_channel(kind, &LinkBlocks::from_network(&n), &ris, Some(&coupling))
        }
        Fidelity::Matched => {
            let n = net.to_kind(kind)?;
            matched_channel(kind, &LinkBlocks::from_network(&n), &ris, None)
        }
        Fidelity::WidelyUsed => {
            let s = LinkBlocks::from_network(&net.to_kind(ParamKind::S)?);
            widely_used_channel(&s.rt, &s.ri, &s.it, &ris.theta()?)
        }
        Fidelity::WidelyUsedNeumann => {
            let z = LinkBlocks::from_network(&net.to_kind(ParamKind::Z)?);
            let s = map_matched(&z, net.z0()).s;
            let mut h = widely_used_channel(&neumann_srt(&z.rt, net.z0()), &s.ri, &s.it, &ris.theta()?)?;
            h.fidelity = Fidelity::WidelyUsedNeumann;
            Ok(h)
        }
    }
}

fn check_inputs(kind: ParamKind, net: &NetworkMatrix, terms: &TerminationSet) -> Result<PortPartition> {
    if net.kind() != kind {
        return Err(Error::KindMismatch { expected: kind, found: net.kind() });
    }
    let p = net.partition();
    if terms.partition() != p {
        return Err(Error::Dimension(format!("terminations {:?} do not fit network {:?}", terms.partition(), p)));
    }
    if (terms.z0 - net.z0()).abs() > 1e-12 * net.z0() {
        return Err(Error::Dimension(format!("z0 mismatch: network {}, terminations {}", net.z0(), terms.z0)));
    }
    Ok(p)
}

/// Exact channel of the full network with arbitrary linear terminations.
///
/// Z: `H = Z̃_RT Z̃_TT⁻¹`; Y: `H = Y_R⁻¹ Ỹ_RT (Ỹ_TT − I)⁻¹ Y_T`;
/// S: `H = (Γ_R + I) S̃_RT (I + Γ_T S̃_TT + S̃_TT)⁻¹`, where the tilded blocks
/// are responses of the terminated network to the source.
pub fn general_channel(kind: ParamKind, net: &NetworkMatrix, terms: &TerminationSet) -> Result<ChannelMatrix> {
    let p = check_inputs(kind, net, terms)?;
    let c1 = CVector::zeros(p.n_t);
    let h = match kind {
        ParamKind::Z => {
            // x = v, y = i, A = Z⁻¹. Open RIS ports carry no current, so they
            // are removed from the network instead of terminated.
            let (z, a2) = match &terms.z_i {
                Termination::OpenCircuit { .. } => (drop_ris_ports(net), CMatrix::zeros(0, 0)),
                Termination::Impedance(zi) => (net.values().clone(), -zi),
            };
            let a = linalg::inv_conversion(&z, "Z")?;
            let problem = TerminationProblem::new(
                a,
                c1,
                -terms.z_t_matrix(),
                MiddleTermination::Matrix(a2),
                -terms.z_r_matrix(),
            )?;
            let r = framework::general_response(&problem)?;
            r.x[2].clone() * linalg::inv_system(&r.x[0], "Z~_TT")?
        }
        ParamKind::Y => {
            // x = i, y = v, A = Y⁻¹
            let a = linalg::inv_conversion(net.values(), "Y")?;
            let a2 = match &terms.z_i {
                Termination::OpenCircuit { ports } => MiddleTermination::Open { ports: *ports },
                Termination::Impedance(_) => MiddleTermination::Matrix(-terms.y_i()?),
            };
            let (y_t, y_r) = (terms.y_t()?, terms.y_r()?);
            let problem = TerminationProblem::new(a, c1, -&y_t, a2, -&y_r)?;
            let r = framework::general_response(&problem)?;
            let y_r_inv = linalg::inv_system(&y_r, "Y_R")?;
            let tt = linalg::inv_system(&(&r.x[0] - identity(p.n_t)), "Y~_TT - I")?;
            y_r_inv * &r.x[2] * tt * y_t
        }
        ParamKind::S => {
            // x = a, y = b, A = S
            let (g_t, g_r) = (terms.gamma_t()?, terms.gamma_r()?);
            let problem = TerminationProblem::new(
                net.values().clone(),
                c1,
                g_t.clone(),
                MiddleTermination::Matrix(terms.theta()?),
                g_r.clone(),
            )?;
            let Response { y, .. } = framework::general_response(&problem)?;
            let denom = identity(p.n_t) + &g_t * &y[0] + &y[0];
            (g_r + identity(p.n_r)) * &y[2] * linalg::inv_system(&denom, "I + Gamma_T S~_TT + S~_TT")?
        }
    };
    Ok(ChannelMatrix { h, fidelity: Fidelity::General })
}

fn drop_ris_ports(net: &NetworkMatrix) -> CMatrix {
    let p = net.partition();
    let keep: Vec<usize> = p.range(Port::T).chain(p.range(Port::R)).collect();
    CMatrix::from_fn(keep.len(), keep.len(), |i, j| net.values()[(keep[i], keep[j])])
}

/// `v_R` as a function of the source voltages rather than of `v_T`.
///
/// Not a fidelity level: it mixes the channel with the source impedances.
pub fn source_referred_channel(net: &NetworkMatrix, terms: &TerminationSet) -> Result<CMatrix> {
    let z = net.to_kind(ParamKind::Z)?;
    let h = general_channel(ParamKind::Z, &z, terms)?.h;
    let p = z.partition();
    let (a2, zz) = match &terms.z_i {
        Termination::OpenCircuit { .. } => (CMatrix::zeros(0, 0), drop_ris_ports(&z)),
        Termination::Impedance(zi) => (-zi, z.values().clone()),
    };
    let problem = TerminationProblem::new(
        linalg::inv_conversion(&zz, "Z")?,
        CVector::zeros(p.n_t),
        -terms.z_t_matrix(),
        MiddleTermination::Matrix(a2),
        -terms.z_r_matrix(),
    )?;
    let r = framework::general_response(&problem)?;
    Ok(h * &r.x[0])
}

fn check_unilateral(net: &NetworkMatrix) -> Result<()> {
    let tol = 1e-14 * net.values().norm();
    for (block, norm) in net.upper_block_norms() {
        if norm > tol {
            return Err(Error::NotUnilateral { block, norm });
        }
    }
    Ok(())
}

/// Channel of a unilateral network (TI, TR, IR blocks zero):
///
/// ```text
/// Z: Z_R(Z_R + Z_RR)⁻¹ (Z_RT − Z_RI(Z_I + Z_II)⁻¹Z_IT) Z_TT⁻¹
/// Y: (Y_R + Y_RR)⁻¹ (−Y_RT + Y_RI(Y_I + Y_II)⁻¹Y_IT)
/// S: (Γ_R + I)(I − S_RRΓ_R)⁻¹ (S_RT + S_RI(I − ΘS_II)⁻¹ΘS_IT) (I + S_TT)⁻¹
/// ```
pub fn unilateral_channel(kind: ParamKind, net: &NetworkMatrix, terms: &TerminationSet) -> Result<ChannelMatrix> {
    let p = check_inputs(kind, net, terms)?;
    check_unilateral(net)?;
    let b = |r, c| net.block(r, c);
    let link = LinkBlocks::from_network(net);
    let ii = b(Port::I, Port::I);
    let h = match kind {
        ParamKind::Z => {
            let z_r = terms.z_r_matrix();
            let ris = match &terms.z_i {
                Termination::OpenCircuit { .. } => link.rt.clone(),
                Termination::Impedance(zi) => &link.rt - &link.ri * linalg::inv_system(&(zi + &ii), "Z_I + Z_II")? * &link.it,
            };
            let rr = linalg::inv_system(&(&z_r + b(Port::R, Port::R)), "Z_R + Z_RR")?;
            z_r * rr * ris * linalg::inv_system(&b(Port::T, Port::T), "Z_TT")?
        }
        ParamKind::Y => {
            let ris = linalg::inv_system(&(terms.y_i()? + &ii), "Y_I + Y_II")?;
            let rr = linalg::inv_system(&(terms.y_r()? + b(Port::R, Port::R)), "Y_R + Y_RR")?;
            rr * (-&link.rt + &link.ri * ris * &link.it)
        }
        ParamKind::S => {
            let theta = terms.theta()?;
            let g_r = terms.gamma_r()?;
            let ris = linalg::inv_system(&(identity(p.n_i) - &theta * &ii), "I - Theta S_II")? * &theta;
            let rr = linalg::inv_system(&(identity(p.n_r) - b(Port::R, Port::R) * &g_r), "I - S_RR Gamma_R")?;
            let tt = linalg::inv_system(&(identity(p.n_t) + b(Port::T, Port::T)), "I + S_TT")?;
            (g_r + identity(p.n_r)) * rr * (&link.rt + &link.ri * ris * &link.it) * tt
        }
    };
    Ok(ChannelMatrix { h, fidelity: Fidelity::Unilateral })
}

/// Channel with matched antennas, sources and loads:
///
/// ```text
/// Z: (1/2Z₀)(Z_RT − Z_RI(Z_I + C)⁻¹Z_IT)
/// Y: (1/2Y₀)(−Y_RT + Y_RI(Y_I + C)⁻¹Y_IT)
/// S: S_RT + S_RI(I − ΘC)⁻¹ΘS_IT
/// ```
///
/// `C` is the RIS mutual-coupling block in the same kind (`Z_II`, `Y_II` or
/// `S_II`); without it `C` is `Z₀I`, `Y₀I` or `0` respectively.
pub fn matched_channel(
    kind: ParamKind,
    blocks: &LinkBlocks,
    ris: &RisConfiguration,
    ris_coupling: Option<&CMatrix>,
) -> Result<ChannelMatrix> {
    blocks.check()?;
    let n = blocks.n_i();
    if ris.n_i() != n || ris_coupling.is_some_and(|c| c.shape() != (n, n)) {
        return Err(Error::Dimension(format!("RIS has {} ports, link blocks {n}", ris.n_i())));
    }
    let z0 = ris.z0;
    let y0 = 1.0 / z0;
    let fidelity = if ris_coupling.is_some() { Fidelity::MatchedWithCoupling } else { Fidelity::Matched };
    let h = match kind {
        ParamKind::Z => {
            let c = ris_coupling.cloned().unwrap_or_else(|| identity(n) * real(z0));
            let ris_term = match ris.impedance()? {
                Termination::OpenCircuit { .. } => CMatrix::zeros(blocks.rt.nrows(), blocks.rt.ncols()),
                Termination::Impedance(zi) => &blocks.ri * linalg::inv_system(&(zi + c), "Z_I + Z_II")? * &blocks.it,
            };
            (&blocks.rt - ris_term) * real(1.0 / (2.0 * z0))
        }
        ParamKind::Y => {
            let c = ris_coupling.cloned().unwrap_or_else(|| identity(n) * real(y0));
            let inv = linalg::inv_system(&(ris.admittance()? + c), "Y_I + Y_II")?;
            (-&blocks.rt + &blocks.ri * inv * &blocks.it) * real(1.0 / (2.0 * y0))
        }
        ParamKind::S => {
            let theta = ris.theta()?;
            let inner = match ris_coupling {
                Some(c) => linalg::inv_system(&(identity(n) - &theta * c), "I - Theta S_II")? * theta,
                None => theta,
            };
            &blocks.rt + &blocks.ri * inner * &blocks.it
        }
    };
    Ok(ChannelMatrix { h, fidelity })
}

/// Y- and S-form link blocks of a unilateral network from its Z-parameters:
///
/// ```text
/// Y_RI = −Z_RR⁻¹ Z_RI Z_II⁻¹        S_RI = 2Z₀(Z_RR + Z₀I)⁻¹ Z_RI (Z_II + Z₀I)⁻¹
/// Y_IT = −Z_II⁻¹ Z_IT Z_TT⁻¹        S_IT = 2Z₀(Z_II + Z₀I)⁻¹ Z_IT (Z_TT + Z₀I)⁻¹
/// Y_RT = Z_RR⁻¹(−Z_RT + Z_RI Z_II⁻¹ Z_IT)Z_TT⁻¹
/// S_RT = 2Z₀(Z_RR + Z₀I)⁻¹(Z_RT − Z_RI(Z_II + Z₀I)⁻¹Z_IT)(Z_TT + Z₀I)⁻¹
/// ```
pub fn map_unilateral(z: &NetworkMatrix) -> Result<MappedBlocks> {
    if z.kind() != ParamKind::Z {
        return Err(Error::KindMismatch { expected: ParamKind::Z, found: z.kind() });
    }
    let z0 = z.z0();
    let link = LinkBlocks::from_network(z);
    let inv = |m: CMatrix, what| linalg::inv_conversion(&m, what);
    let shifted = |m: CMatrix, what| {
        let n = m.nrows();
        linalg::inv_conversion(&(m + identity(n) * real(z0)), what)
    };
    let (tt, ii, rr) = (z.block(Port::T, Port::T), z.block(Port::I, Port::I), z.block(Port::R, Port::R));
    let (tt_i, ii_i, rr_i) = (inv(tt.clone(), "Z_TT")?, inv(ii.clone(), "Z_II")?, inv(rr.clone(), "Z_RR")?);
    let (tt_s, ii_s, rr_s) = (
        shifted(tt, "Z_TT + Z0 I")?,
        shifted(ii, "Z_II + Z0 I")?,
        shifted(rr, "Z_RR + Z0 I")?,
    );
    let two_z0 = real(2.0 * z0);
    let y = LinkBlocks {
        ri: -(&rr_i * &link.ri * &ii_i),
        it: -(&ii_i * &link.it * &tt_i),
        rt: &rr_i * (-&link.rt + &link.ri * &ii_i * &link.it) * &tt_i,
    };
    let s = LinkBlocks {
        ri: &rr_s * &link.ri * &ii_s * two_z0,
        it: &ii_s * &link.it * &tt_s * two_z0,
        rt: &rr_s * (&link.rt - &link.ri * &ii_s * &link.it) * &tt_s * two_z0,
    };
    Ok(MappedBlocks { y, s })
}

/// The mappings for matched antennas without coupling (`Z_TT = Z_II = Z_RR = Z₀I`):
///
/// ```text
/// Y_RI = −Z_RI/Z₀²    Y_IT = −Z_IT/Z₀²    Y_RT = (−Z_RT + Z_RI Z_IT/Z₀)/Z₀²
/// S_RI = Z_RI/2Z₀     S_IT = Z_IT/2Z₀     S_RT = (Z_RT − Z_RI Z_IT/2Z₀)/2Z₀
/// ```
pub fn map_matched(z: &LinkBlocks, z0: f64) -> MappedBlocks {
    let zz = z0 * z0;
    let ri_it = &z.ri * &z.it;
    let y = LinkBlocks {
        ri: &z.ri * real(-1.0 / zz),
        it: &z.it * real(-1.0 / zz),
        rt: (-&z.rt + &ri_it * real(1.0 / z0)) * real(1.0 / zz),
    };
    let s = LinkBlocks {
        ri: &z.ri * real(1.0 / (2.0 * z0)),
        it: &z.it * real(1.0 / (2.0 * z0)),
        rt: (&z.rt - &ri_it * real(1.0 / (2.0 * z0))) * real(1.0 / (2.0 * z0)),
    };
    MappedBlocks { y, s }
}

/// Z-form blocks consistent with matched S-form `S_RI`, `S_IT` and a given
/// `Z_RT`: `Z_RI = 2Z₀S_RI`, `Z_IT = 2Z₀S_IT`.
pub fn z_from_matched_s(s_ri: &CMatrix, s_it: &CMatrix, z_rt: &CMatrix, z0: f64) -> LinkBlocks {
    LinkBlocks { rt: z_rt.clone(), ri: s_ri * real(2.0 * z0), it: s_it * real(2.0 * z0) }
}

/// First-order Neumann approximation `S_RT ≈ Z_RT / 2Z₀`.
pub fn neumann_srt(z_rt: &CMatrix, z0: f64) -> CMatrix {
    z_rt * real(1.0 / (2.0 * z0))
}

/// `H = H_RT + H_RI Θ H_IT`.
pub fn widely_used_channel(h_rt: &CMatrix, h_ri: &CMatrix, h_it: &CMatrix, theta: &CMatrix) -> Result<ChannelMatrix> {
    LinkBlocks { rt: h_rt.clone(), ri: h_ri.clone(), it: h_it.clone() }.check()?;
    if theta.shape() != (h_ri.ncols(), h_it.nrows()) {
        return Err(Error::Dimension(format!("Theta is {:?}, RIS has {} ports", theta.shape(), h_it.nrows())));
    }
    Ok(ChannelMatrix { h: h_rt + h_ri * theta * h_it, fidelity: Fidelity::WidelyUsed })
}
