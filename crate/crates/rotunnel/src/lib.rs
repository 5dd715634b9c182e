//! Rotational tunneling of a magnetic dipole levitated between superconducting plates.
//!
//! The rotor Hamiltonian is solved in the angular-momentum basis |n⟩, n = −N..N, in units of the
//! kinetic energy E_k = ħ²/(2I). Closed and open dynamics act on that basis or on its energy
//! eigenbasis.

pub mod channels;
pub mod constants;
pub mod error;
pub mod mathieu;
pub mod open;
pub mod quad;
pub mod rotor;
pub mod symmetry;
pub mod unitary;
pub mod units;

pub use error::{Error, Result};
