use std::fmt;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io,
    Config,
    Data,
    Compute,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Io => 3,
            Kind::Config => 4,
            Kind::Data => 5,
            Kind::Compute => 6,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Io => "I/O error",
            Kind::Config => "configuration error",
            Kind::Data => "data error",
            Kind::Compute => "computation failed",
        })
    }
}

/// Tags an error with its class. The tag has to be the outermost context so
/// that `main` can recover it with `downcast_ref`.
pub trait Classify<T> {
    fn kind(self, kind: Kind) -> anyhow::Result<T>;
    fn kind_with<F: FnOnce() -> String>(self, kind: Kind, what: F) -> anyhow::Result<T>;
}

impl<T, E> Classify<T> for Result<T, E>
where
    E: std::error::Error + Send + Sync + 'static,
{
    fn kind(self, kind: Kind) -> anyhow::Result<T> {
        self.map_err(|e| anyhow::Error::new(e).context(kind))
    }

    fn kind_with<F: FnOnce() -> String>(self, kind: Kind, what: F) -> anyhow::Result<T> {
        self.map_err(|e| anyhow::Error::new(e).context(what()).context(kind))
    }
}

pub fn fail(kind: Kind, msg: impl fmt::Display) -> anyhow::Error {
    anyhow::anyhow!("{msg}").context(kind)
}

/// Bad expressions, arguments and shapes come from the configuration; zero
/// instrument columns from the data; anything else is a computation failure.
pub fn core_kind(e: &feastest_core::Error) -> Kind {
    use feastest_core::Error::*;
    match e {
        Syntax { .. } | UndeclaredSymbol(_) | DuplicateSymbol(_) | Unbound(_) | Dimension(_) | InvalidArgument(_)
        | Unsupported(_) => Kind::Config,
        ZeroColumn(_) => Kind::Data,
        _ => Kind::Compute,
    }
}

pub trait CoreResult<T> {
    fn core(self) -> anyhow::Result<T>;
}

impl<T> CoreResult<T> for feastest_core::Result<T> {
    fn core(self) -> anyhow::Result<T> {
        self.map_err(|e| {
            let kind = core_kind(&e);
            anyhow::Error::new(e).context(kind)
        })
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.downcast_ref::<Kind>().map_or(1, |k| k.exit_code())
}
