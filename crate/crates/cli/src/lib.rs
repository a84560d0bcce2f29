//! Library side of the `lineage` command: panel lookup, evidence reports and simulation
//! runs, kept separate from argument parsing so they can be tested directly.

pub mod panels;
pub mod report;
pub mod simulate;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INPUT_ERROR: i32 = 2;
    /// Every requested estimator was inapplicable to the inputs.
    pub const NOT_APPLICABLE: i32 = 3;
}
