//! Readers and writers for everything that crosses the process boundary.

pub mod config;
pub mod mrc;
pub mod pdb;
pub mod star;

pub use config::{parse_scene_config, ConfigError, SceneConfig, StructureEntry};
pub use mrc::{read_volume, write_volume, MrcError, VolumeHeader};
pub use pdb::{format_atom_record, parse_atomic_model, vdw_radius, Atom, AtomicModel, PdbError, DEFAULT_VDW_RADIUS};
pub use star::{parse_pick_table, write_pick_table, PickRecord, StarError};
