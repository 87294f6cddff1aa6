//! Test support for the snp crates: independent oracles and seeded input
//! generators. Nothing here is shipped; the point is that every oracle
//! takes a different route than the implementation it checks.

pub mod gen;
pub mod oracle;
