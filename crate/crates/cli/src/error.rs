use std::fmt;

/// A failure that terminates the process with a specific exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Malformed input, schema violations, bad flags. Exit 2.
    Input(String),
    /// Degenerate design such as a constant column. Exit 3.
    Degenerate(String),
    /// Numerical failure during fitting. Exit 4.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Degenerate(_) => 3,
            Self::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Self::Input(m) | Self::Degenerate(m) | Self::Numerical(m) => m,
        };
        // keep every message on one line
        f.write_str(&msg.replace(['\n', '\r'], " "))
    }
}

impl From<cenbar::Error> for CliError {
    fn from(e: cenbar::Error) -> Self {
        use cenbar::Error as E;
        let msg = e.to_string();
        match e {
            E::ConstantColumn(_) => Self::Degenerate(msg),
            E::EmptyDataset
            | E::TooFewObservations(_)
            | E::LengthMismatch { .. }
            | E::InvalidEvent { .. }
            | E::NonFinite { .. }
            | E::InvalidFolds { .. }
            | E::InvalidPenalty(_)
            | E::InvalidScreenSize { .. }
            | E::InvalidConfig(_) => Self::Input(msg),
            E::ZeroSurvivor { .. }
            | E::SolveFailed { .. }
            | E::NonFiniteCoefficient(_)
            | E::DegenerateGrid { .. }
            | E::CrossValidationFailed
            | E::ZeroLambda
            | E::Calibration(_) => Self::Numerical(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
