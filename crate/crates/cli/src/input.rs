use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use binsis::{BinaryMatrix, Error, Heuristic, MarginPair, SamplerConfig, StructuralZeroMask};

use crate::InputArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    /// 1 for infeasible input or a failed construction, 2 for bad input,
    /// 3 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Read { .. } | CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Write { .. } | CliError::Io(_) => 3,
            CliError::Core(e) => match e {
                Error::InfeasibleMargins(_)
                | Error::NoValidPath
                | Error::DeadEnd { .. }
                | Error::ConstructionFailed(_)
                | Error::OutOfSupport
                | Error::BudgetExceeded(_) => 1,
                Error::MaskViolation(_)
                | Error::Domain(_)
                | Error::Shape(_)
                | Error::Parse { .. }
                | Error::SizeLimit { .. }
                | Error::Degenerate(_) => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })
}

/// Margins, mask and sampler settings resolved from the command line.
pub struct Problem {
    pub margins: MarginPair,
    pub mask: Option<StructuralZeroMask>,
    pub heuristic: Heuristic,
    pub config: SamplerConfig,
}

impl Problem {
    pub fn load(args: &InputArgs) -> CliResult<Self> {
        let text = read(&args.margins)?;
        let margins = MarginPair::parse_text(&text).map_err(|source| CliError::Parse {
            path: args.margins.clone(),
            source,
        })?;
        let (m, n) = (margins.m(), margins.n());
        let mask = match (&args.zeros, args.zero_diagonal) {
            (Some(path), _) => {
                let text = read(path)?;
                Some(StructuralZeroMask::parse_text(&text, m, n).map_err(|source| CliError::Parse {
                    path: path.clone(),
                    source,
                })?)
            }
            (None, true) => Some(StructuralZeroMask::zero_diagonal(m, n)),
            (None, false) => None,
        };
        let requested = Heuristic::from(args.heuristic);
        let heuristic = if mask.is_some() {
            requested.with_zeros()
        } else if requested.is_sz() {
            return Err(CliError::Usage(format!(
                "heuristic {requested} needs --zeros or --zero-diagonal"
            )));
        } else {
            requested
        };
        let config = SamplerConfig {
            heuristic,
            keep_column_order: args.keep_column_order,
            allow_general_mask: args.allow_general_zeros,
            ..SamplerConfig::default()
        };
        Ok(Self {
            margins,
            mask,
            heuristic,
            config,
        })
    }

    pub fn mask(&self) -> Option<&StructuralZeroMask> {
        self.mask.as_ref()
    }

    pub fn config_for(&self, heuristic: Heuristic) -> SamplerConfig {
        SamplerConfig {
            heuristic,
            ..self.config
        }
    }
}

pub fn load_matrix(path: &Path) -> CliResult<BinaryMatrix> {
    read(path)?.parse().map_err(|source| CliError::Parse {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 2);
        assert_eq!(CliError::Core(Error::NoValidPath).exit_code(), 1);
        let io = || io::Error::other("x");
        assert_eq!(CliError::Io(io()).exit_code(), 3);
        assert_eq!(
            CliError::Read {
                path: PathBuf::new(),
                source: io()
            }
            .exit_code(),
            2
        );
    }
}
