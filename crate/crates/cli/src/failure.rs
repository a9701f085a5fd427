use std::fmt;
use std::process::ExitCode;

use roiseg::Error;

/// What went wrong, as far as the exit code is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage = 1,
    Data = 2,
    Backend = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self { kind: Kind::Usage, error: anyhow::anyhow!("{msg}") }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self { kind: Kind::Data, error: anyhow::anyhow!("{msg}") }
    }

    pub fn backend(msg: impl fmt::Display) -> Self {
        Self { kind: Kind::Backend, error: anyhow::anyhow!("{msg}") }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self { kind: self.kind, error: self.error.context(ctx) }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::InvalidArgument(_) | Error::OddOffset(_) => Kind::Usage,
            Error::Backend { .. } | Error::Protocol(_) => Kind::Backend,
            _ => Kind::Data,
        };
        Self { kind, error: e.into() }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;
