//! Subcommand bodies. Each returns an [`Outcome`]; writing files and
//! choosing the exit status is left to the caller, so `validate` can run
//! the same code and merge the checks.

mod curvature;
mod disk;
mod family;

pub use curvature::{curvature_geometric, curvature_spectral, SpectralInput};
pub use disk::{finsler, schwarz};
pub use family::{ke_solve, wp, GridPoint};

use crate::report::{Report, Table};

pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

impl Outcome {
    /// Moves the checks and tables of `other` into `self`, prefixing names
    /// with `section`.
    pub fn absorb(&mut self, section: &str, other: Outcome) -> serde_json::Value {
        for mut c in other.report.checks {
            c.name = format!("{section}.{}", c.name);
            self.report.check(c);
        }
        for mut t in other.tables {
            t.name = format!("{section}.{}", t.name);
            self.tables.push(t);
        }
        other.report.results
    }
}
