//! Zip trees and zip-zip trees.
//!
//! A zip tree is a binary search tree kept in max-heap order by small random
//! ranks, updated by *unzipping* a search path on insertion and *zipping* two
//! spines on deletion. This crate provides the family of variants that differ
//! only in how ranks are drawn and compared:
//!
//! * [`ziptree::ZipTree`]: the binary tree, with ranks drawn by a
//!   [`ranks::RankPolicy`] (original, uniform, zip-zip, variable-p, biased).
//! * [`jit::JitTree`]: zip-zip trees whose secondary ranks grow one bit at a
//!   time, only when a comparison ties.
//! * [`external::ExtTree`]: items in external nodes, ranked routing keys in
//!   internal nodes.
//! * [`persist::PersistentTree`]: partially persistent trees built from fat
//!   nodes with version-stamped child slots.
//!
//! [`stats`] holds the analytic depth oracle and the estimators used by the
//! experiment harness.

pub mod error;
pub mod external;
pub mod jit;
pub mod persist;
pub mod ranks;
pub mod stats;
pub mod ziptree;

mod engine;

pub use error::{Error, Result};
pub use ranks::{Key, KeyedRng, RankPair, RankPolicy, Variant};
pub use ziptree::ZipTree;
