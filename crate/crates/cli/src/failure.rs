use std::fmt;

use serde::Serialize;

/// A command failure with its process exit code.
#[derive(Debug)]
pub enum Failure {
    Core(reseq_core::Error),
    PortInUse(String),
    Other(String),
}

pub type CliResult<T> = std::result::Result<T, Failure>;

impl From<reseq_core::Error> for Failure {
    fn from(e: reseq_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl Failure {
    pub fn contract(msg: impl Into<String>) -> Self {
        Failure::Core(reseq_core::Error::Contract(msg.into()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.kind(),
            Failure::PortInUse(_) => "port-in-use",
            Failure::Other(_) => "other",
        }
    }

    /// 2 for bad input of any kind, 3 when pruning leaves fewer than two
    /// frames, 4 when the port is taken, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) => match e.kind() {
                "contract" | "validation" | "format" | "ingest" | "json" => 2,
                "prune" => 3,
                _ => 1,
            },
            Failure::PortInUse(_) => 4,
            Failure::Other(_) => 1,
        }
    }

    /// The error as one line, in either human or JSON form.
    pub fn render(&self, json: bool) -> String {
        let message = self.to_string().replace(['\n', '\r'], " ");
        if json {
            #[derive(Serialize)]
            struct Line<'a> {
                error: Body<'a>,
            }
            #[derive(Serialize)]
            struct Body<'a> {
                kind: &'a str,
                message: &'a str,
                exit_code: i32,
            }
            serde_json::to_string(&Line {
                error: Body {
                    kind: self.kind(),
                    message: &message,
                    exit_code: self.exit_code(),
                },
            })
            .expect("plain strings serialize")
        } else {
            format!("reseq: {message}")
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => e.fmt(f),
            Failure::PortInUse(addr) => write!(f, "address {addr} is already in use"),
            Failure::Other(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}
