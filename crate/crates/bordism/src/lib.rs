//! Computational toolkit for mod-p Steenrod algebra calculus, Ext and Tor
//! over subalgebras of the Steenrod algebra, Atiyah–Hirzebruch spectral
//! sequence bookkeeping, and Bazaikin-space invariants.

pub mod fplin;
pub mod steenrod;
pub mod emspaces;
pub mod modbuild;
pub mod resolve;
pub mod barss;
pub mod ahss;
pub mod bazaikin;
