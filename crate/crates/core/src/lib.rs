//! Finite groupoids, group bundles, torsors and bitorsors, extensions
//! `K -> G -> E`, and the degree-2 cohomology of small categories that
//! classifies such extensions over a complete transversal.
//!
//! Everything here is finite and table-driven: groupoids are composition
//! tables, torsors are explicit action tables, cohomology is integer linear
//! algebra on cochain groups presented by cyclic factors. Brute-force
//! enumeration backs every classification theorem at desk scale, so each
//! construction can be cross-checked against an independent oracle.

pub mod bundle;
pub mod category;
pub mod cocycle;
pub mod cohomology;
pub mod error;
pub mod extension;
pub mod gen;
pub mod group;
pub mod groupoid;
pub mod linalg;
pub mod nonabelian;
pub mod obstruction;
pub mod torsor;

pub use bundle::{ActionData, EquivariantBundle, GroupBundle};
pub use error::Error;
pub use group::FiniteGroup;
pub use groupoid::{FiniteGroupoid, GroupoidHom, Transversal};
