//! Quadratic stochastic operators on the finite-dimensional simplex.
//!
//! A quadratic stochastic operator (QSO) maps the simplex to itself via
//! `x'_k = sum_{i,j} P[i][j][k] x_i x_j`, where the heredity coefficients
//! satisfy `P[i][j][k] >= 0`, `P[i][j][k] = P[j][i][k]`, and
//! `sum_k P[i][j][k] = 1`. This crate provides the tensor representation,
//! structural classification (Volterra, ell-Volterra, separable, and related
//! classes), named operator families, trajectory analysis (fixed points,
//! cycles, omega-limit estimation, Cesaro diagnostics), and heredity tensors
//! induced by Gibbs measures on finite graphs.
//!
//! The crate is `no_std` + `alloc`; everything that needs a filesystem or
//! threads lives in the companion `qso-lab` crate.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod dynamics;
pub mod families;
pub mod gibbs;
pub mod sample;
pub mod simplex;
pub mod tensor;
pub mod volterra;

mod linalg;
