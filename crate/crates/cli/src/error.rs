use std::fmt;

/// A failure reported as one `ERROR <CODE> <message>` line on stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    /// The machine-parsable line, always a single line.
    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("ERROR {} {}", self.code, flat.join(" "))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl From<metric_uq::Error> for CliError {
    fn from(e: metric_uq::Error) -> Self {
        use metric_uq::Error as E;
        let code = match &e {
            E::ShapeMismatch { .. } | E::TooFewObservations { .. } => "DATA_SHAPE",
            E::Empty(_) => "EMPTY_DATA",
            E::KOutOfRange { .. } => "K_RANGE",
            E::NeedTwoPredictors { .. } => "NEED_P2",
            E::SingularCovariance { .. } => "SINGULAR_COVARIANCE",
            E::DegenerateWeights => "DEGENERATE_WEIGHTS",
            E::InvalidPoint(_) => "INVALID_POINT",
            E::InvalidParameter(_) => "INVALID_ARGUMENT",
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new("IO", e.to_string())
    }
}
