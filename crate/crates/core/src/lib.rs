//! Spectral flow of paths of selfadjoint Fredholm operators and the
//! variational bifurcation machinery built on it.
//!
//! The crate is `no_std` (with `alloc`); file formats, drivers and the
//! command line live in the `sflow` crate.
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod prelude {
    pub(crate) use alloc::string::String;
    pub(crate) use alloc::vec;
    pub(crate) use alloc::vec::Vec;
    // Float supplies libm-backed methods when std is not linked.
    #[allow(unused_imports)]
    pub(crate) use num_traits::Float;
}

pub mod error;
pub mod family;
pub mod flow;
pub mod geodesic;
pub mod linalg;
pub mod operator;
pub mod scan;

pub use error::{Error, Result};
pub use linalg::{eigendecompose, Spectrum, SymmetricMatrix};
pub use operator::{
    classify_essential, morse_index, relative_morse_index, relative_morse_index_sc, EssentialClass,
    SignCompactOperator, DEFAULT_GAP,
};
