//! Finite elements for two fluids (atmosphere over ocean) coupled through a
//! nonlinear friction law on a flat interface.
//!
//! Taylor–Hood P2/P1 on each side, backward Euler in time. The coupled
//! schemes are in [`schemes`]: geometric averaging of the interface term
//! (GA), its variational multiscale variant with a projected eddy-viscosity
//! term (GA-VMS), and the monolithic reference (TWM, TWM-VMS).
//! [`diagnostics`] checks the discrete energy identity and the stability
//! bound on stored trajectories; [`io`] drives the three experiments.
//!
//! ```
//! use aoflow::mesh::generate_two_domain_mesh;
//! use aoflow::space::Space;
//!
//! let space = Space::new(generate_two_domain_mesh(4).unwrap());
//! assert_eq!(space.mesh().interface.len(), 4);
//! ```

pub mod error;
pub mod mesh;
pub mod quadrature;
pub mod space;
pub mod solver;
pub mod assembly;
pub mod interface;
pub mod manufactured;
pub mod problem;
pub mod schemes;
pub mod diagnostics;
pub mod io;

// The guide's code blocks run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    mod spaces {}
    #[doc = include_str!("../../../book/src/interface.md")]
    mod interface {}
    #[doc = include_str!("../../../book/src/schemes.md")]
    mod schemes {}
    #[doc = include_str!("../../../book/src/vms.md")]
    mod vms {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
