//! Exact symbolic engine for the Fedosov resolution of polyvector fields,
//! polydifferential operators, Hochschild chains and exterior forms on a
//! polynomial chart, with a generic L-infinity twisting kernel and a
//! deformation-quantization layer on top. All arithmetic is exact over Q.

pub mod ratio;
pub mod poly;
pub mod graded;
pub mod pvf;
pub mod diffop;
pub mod form;
pub mod chain;
pub mod hkr;
pub mod jet;
pub mod fedosov;
pub mod linfty;
pub mod matrixq;
pub mod omega;
pub mod quantize;
pub mod sampler;
pub mod scene;

pub use graded::{koszul_sign, shuffles, GradedSymbol, Shuffle, TruncationContext, VarKind};
pub use poly::{IdxSet, Mono, XPoly};
pub use ratio::Rat;

pub use chain::HochChain;
pub use diffop::PolyDiffOp;
pub use form::ExtForm;
pub use pvf::PolyVecField;

pub use fedosov::{Carrier, ConnectionData, FedosovData};
pub use jet::PolyJet;
pub use linfty::{LinftyModule, LinftyMorphism, LinftySpace, MCElement};
pub use omega::OmegaMorphism;
pub use quantize::{GaugeElement, PoissonStructure, StarProduct};
pub use sampler::Sampler;
pub use scene::Scene;
