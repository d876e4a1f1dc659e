//! Named polarization states.
//!
//! `|D> = (|H> + |V>)/√2`, `|A> = (|H> − |V>)/√2`, `|L> = (|H> + i|V>)/√2`,
//! `|R> = (|H> − i|V>)/√2`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;

use super::{c, Ket};
use crate::error::{Error, Result};

pub fn h() -> Ket {
    DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])
}

pub fn v() -> Ket {
    DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])
}

pub fn d() -> Ket {
    DVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)])
}

pub fn a() -> Ket {
    DVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)])
}

pub fn l() -> Ket {
    DVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)])
}

pub fn r() -> Ket {
    DVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)])
}

fn bell(hh_vv: bool, sign: f64) -> Ket {
    let mut k = DVector::from_element(4, c(0.0, 0.0));
    if hh_vv {
        k[0] = c(FRAC_1_SQRT_2, 0.0);
        k[3] = c(sign * FRAC_1_SQRT_2, 0.0);
    } else {
        k[1] = c(FRAC_1_SQRT_2, 0.0);
        k[2] = c(sign * FRAC_1_SQRT_2, 0.0);
    }
    k
}

pub fn bell_phi_plus() -> Ket {
    bell(true, 1.0)
}

pub fn bell_phi_minus() -> Ket {
    bell(true, -1.0)
}

pub fn bell_psi_plus() -> Ket {
    bell(false, 1.0)
}

pub fn bell_psi_minus() -> Ket {
    bell(false, -1.0)
}

pub fn product(kets: &[Ket]) -> Ket {
    kets.iter()
        .fold(DVector::from_element(1, c(1.0, 0.0)), |acc, k| acc.kronecker(k))
}

/// Parse a state name: a product string over `HVDALR` (e.g. `"HV"`,
/// `"VVVV"`) or one of `phi+`, `phi-`, `psi+`, `psi-`.
pub fn parse_ket(spec: &str) -> Result<Ket> {
    let s = spec.trim();
    match s.to_ascii_lowercase().as_str() {
        "phi+" => return Ok(bell_phi_plus()),
        "phi-" => return Ok(bell_phi_minus()),
        "psi+" => return Ok(bell_psi_plus()),
        "psi-" => return Ok(bell_psi_minus()),
        _ => {}
    }
    if s.is_empty() || s.len() > super::MAX_QUBITS {
        return Err(Error::invalid(format!("unknown state '{spec}'")));
    }
    let kets = s
        .chars()
        .map(|ch| match ch.to_ascii_uppercase() {
            'H' => Ok(h()),
            'V' => Ok(v()),
            'D' => Ok(d()),
            'A' => Ok(a()),
            'L' => Ok(l()),
            'R' => Ok(r()),
            _ => Err(Error::invalid(format!("unknown state '{spec}'"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(product(&kets))
}
