use std::fmt;
use std::path::Path;

use strainshape::Error;

/// Command failure with its process exit code.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Schema(String),
    NotConverged(String),
    RankDeficient(String),
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Schema(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::RankDeficient(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Schema(m) => write!(f, "invalid input: {m}"),
            Failure::NotConverged(m) => write!(f, "estimation failed: {m}"),
            Failure::RankDeficient(m) => write!(f, "calibration failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::Io(e.to_string()),
            Error::RankDeficient(m) => Failure::RankDeficient(m),
            other => Failure::Schema(other.to_string()),
        }
    }
}
