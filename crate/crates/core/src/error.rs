use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("format error{}: {detail}", line.map(|n| format!(" at line {n}")).unwrap_or_default())]
    Format { line: Option<usize>, detail: String },

    #[error("unknown Bloom level `{name}`{}", line.map(|n| format!(" at line {n}")).unwrap_or_default())]
    UnknownLevelName { name: String, line: Option<usize> },

    #[error("invalid course: {0}")]
    InvalidCourse(String),

    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),

    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),

    // prompt_builder
    #[error("prompt template is empty")]
    EmptyTemplate,

    #[error("module `{0}` is not part of the course")]
    ModuleNotInCourse(String),

    #[error("prompt needs ~{estimated} tokens plus {completion} completion tokens, over the usable budget of {budget} (context limit {limit})")]
    ContextBudgetExceeded {
        estimated: u32,
        completion: u32,
        budget: u32,
        limit: u32,
    },

    // llm_client
    #[error("environment variable `{0}` holding the API credential is not set")]
    MissingCredential(String),

    #[error("network failure: {0}")]
    NetworkFailure(String),

    #[error("provider returned status {status}: {body}")]
    ProviderError { status: u16, body: String },

    #[error("no recorded completion for request key {0}")]
    ReplayMiss(String),

    #[error("replay store `{0}` does not exist")]
    MissingStore(String),

    #[error("cannot write replay store: {0}")]
    StoreWriteFailure(String),

    // lo_parser
    #[error("completion contains no list items")]
    NoListFound,

    #[error("completion contains list markers but every item is empty")]
    EmptyItems,

    // lo_analysis
    #[error("learning objective text is empty")]
    EmptyText,

    #[error("no verb analysis for `{0}`")]
    MissingAnalysis(String),

    // agreement_stats
    #[error("label vectors are not aligned on the same items")]
    MisalignedVectors,

    #[error("label vectors are empty")]
    EmptyVectors,

    #[error("agreement needs at least two annotators, found {0}")]
    FewerThanTwoRaters(usize),

    #[error("no items remain after exclusions")]
    EmptyOverlap,

    #[error("no module kind known for `{0}`")]
    UnknownModuleKind(String),
}

impl Error {
    /// Attaches a line number to format-style errors that lack one.
    pub fn at_line(self, line: usize) -> Error {
        match self {
            Error::Format { line: None, detail } => Error::Format {
                line: Some(line),
                detail,
            },
            Error::UnknownLevelName { name, line: None } => Error::UnknownLevelName {
                name,
                line: Some(line),
            },
            other => other,
        }
    }
}
