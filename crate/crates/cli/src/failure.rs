use std::fmt;
use std::path::Path;

/// Exit status for malformed input or invalid arguments.
pub const EXIT_INPUT: u8 = 2;
/// Exit status for numerical or training failures.
pub const EXIT_COMPUTE: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_INPUT,
            error: error.into(),
        }
    }

    pub fn compute(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_COMPUTE,
            error: error.into(),
        }
    }

    pub fn input_msg(msg: impl fmt::Display) -> Self {
        Self::input(anyhow::anyhow!("{msg}"))
    }
}

impl From<diodeq::Error> for Failure {
    fn from(e: diodeq::Error) -> Self {
        if e.is_input_error() {
            Self::input(e)
        } else {
            Self::compute(e)
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.error)
    }
}

/// I/O on a named path; reading or writing user paths is an input problem.
pub fn io_at<T>(r: std::io::Result<T>, path: &Path) -> CmdResult<T> {
    r.map_err(|e| Failure::input(anyhow::anyhow!("{}: {e}", path.display())))
}
