use std::fmt;
use std::path::Path;

use inclusiveness::econometrics::EconometricsError;
use inclusiveness::multivariate::MultivariateError;
use inclusiveness::paneldata::PanelError;
use inclusiveness::synth::SynthError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Validation,
    Numerical,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config | ErrorClass::Validation => 1,
            ErrorClass::Numerical => 2,
            ErrorClass::Io => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub class: ErrorClass,
    pub stage: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(class: ErrorClass, stage: &'static str, message: impl Into<String>) -> Self {
        CliError { class, stage, message: message.into() }
    }

    pub fn config(stage: &'static str, message: impl Into<String>) -> Self {
        CliError::new(ErrorClass::Config, stage, message)
    }

    pub fn io(stage: &'static str, path: &Path, err: &std::io::Error) -> Self {
        CliError::new(ErrorClass::Io, stage, format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.class.exit_code()
    }

    pub fn panel(stage: &'static str, e: PanelError) -> Self {
        CliError::new(classify_panel(&e), stage, e.to_string())
    }

    pub fn multivariate(stage: &'static str, e: MultivariateError) -> Self {
        let class = match &e {
            MultivariateError::Panel(p) => classify_panel(p),
            MultivariateError::UnknownAnchor(_) | MultivariateError::InvalidOption(_) => ErrorClass::Config,
            _ => ErrorClass::Numerical,
        };
        CliError::new(class, stage, e.to_string())
    }

    pub fn econometrics(stage: &'static str, e: EconometricsError) -> Self {
        let class = match &e {
            EconometricsError::Panel(p) => classify_panel(p),
            EconometricsError::InvalidSpec(_) | EconometricsError::UnknownInstrument(_) => ErrorClass::Config,
            _ => ErrorClass::Numerical,
        };
        CliError::new(class, stage, e.to_string())
    }

    pub fn synth(stage: &'static str, e: SynthError) -> Self {
        let class = match &e {
            SynthError::InvalidSpec(_) => ErrorClass::Config,
            SynthError::Panel(p) => classify_panel(p),
        };
        CliError::new(class, stage, e.to_string())
    }
}

fn classify_panel(e: &PanelError) -> ErrorClass {
    match e {
        PanelError::Io { .. } => ErrorClass::Io,
        PanelError::Csv(c) if c.is_io_error() => ErrorClass::Io,
        PanelError::Csv(_)
        | PanelError::MissingColumn(_)
        | PanelError::DuplicateKey { .. }
        | PanelError::UnparseableNumeric { .. }
        | PanelError::EmptyCountry(_)
        | PanelError::EmptyPanel => ErrorClass::Validation,
        PanelError::InvalidSchema(_)
        | PanelError::UnknownVariable(_)
        | PanelError::DuplicateVariable(_)
        | PanelError::LagTooLarge { .. }
        | PanelError::ZeroLag
        | PanelError::InvalidShift(_) => ErrorClass::Config,
        PanelError::ZeroVariance(_)
        | PanelError::InsufficientData(_)
        | PanelError::NonPositiveArgument { .. }
        | PanelError::DimensionMismatch(_) => ErrorClass::Numerical,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}
