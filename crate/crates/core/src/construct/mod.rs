//! Inverse constructions: schedules, the staged recursion producing a
//! symbolic measure, auxiliary measures and exact queries.

pub mod brute;
mod measure;
mod members;
mod schedule;

pub use measure::{
    MeasureKind, Path, PathStep, Run, Sample, SampleOptions, StageAtom, StageTable, SymbolicMeasure,
};
pub use members::{colex_rank, colex_unrank, member_count};
pub use schedule::{
    build_schedule, dense_sequence, AtomKind, DroppedAtom, MenuAtom, Mode, Phase, PhaseSchedule,
    Preset, Round, Schedule,
};
