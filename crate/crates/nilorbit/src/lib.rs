pub mod group;
pub mod lie;
pub mod polymap;
pub mod scalar;
pub mod dihedral;
pub mod finsets;
pub mod genpoly;
pub mod walsh;
pub mod nilmanifold;
pub mod lattice;
pub mod equidist;
pub mod uniformity;
pub mod wwdyn;
