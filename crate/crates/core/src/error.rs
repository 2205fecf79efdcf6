use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("manifest schema error: missing required column `{0}`")]
    MissingColumn(String),

    #[error("manifest row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("duplicate image_ref `{0}` in manifest")]
    DuplicateImageRef(String),

    #[error("imputation impossible: {0}")]
    ImputationImpossible(String),

    #[error("{what} = {value} is outside {range}")]
    Range { what: String, value: f64, range: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("could not decode image `{image_ref}`: {message}")]
    Decode { image_ref: String, message: String },

    #[error("balancing plan error: {0}")]
    Plan(String),

    #[error("balancing plan stopped after cells [{}]: {message}", completed.join(", "))]
    PartialPlan { completed: Vec<String>, message: String },

    #[error(
        "pretrained weights for backbone `{0}` are not available offline; \
         use the `SyntheticTiny` backbone instead"
    )]
    WeightsUnavailable(String),

    #[error("unknown {kind} `{name}`")]
    Registry { kind: &'static str, name: String },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("AUC is undefined: {0}")]
    UndefinedAuc(String),

    #[error("layer selection error: {0}")]
    LayerSelection(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("plot error: {0}")]
    Plot(String),

    #[error("missing artifact {}: run `tlbench {producer}` first", path.display())]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error("no reports found in {}", .0.display())]
    NoReports(PathBuf),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn range(what: impl Into<String>, value: f64, range: impl Into<String>) -> Self {
        Error::Range {
            what: what.into(),
            value,
            range: range.into(),
        }
    }

    /// Wraps the error with a short description of what was being attempted.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with any context layers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T, E: Into<Error>> ResultExt<T> for std::result::Result<T, E> {
    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.into().context(context))
    }
}
