use std::fmt;

use attenmia_core::baselines::BaselineError;
use attenmia_core::classifier::ClassifierError;
use attenmia_core::data::DataError;
use attenmia_core::extraction::ExtractionError;
use attenmia_core::features::FeatureError;
use attenmia_core::metrics::MetricError;
use attenmia_core::perturb::PerturbError;
use attenmia_core::pipeline::PipelineError;
use attenmia_core::synth::SynthError;
use attenmia_core::transformer::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Bad arguments, unreadable or malformed files.
    Input,
    /// Well-formed input that violates a data invariant.
    Data,
    Internal,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Input => 2,
            Category::Data => 3,
            Category::Internal => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Input => "input",
            Category::Data => "data",
            Category::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: Category,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            category,
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn input(kind: &str, message: impl Into<String>) -> Self {
        Self::new(Category::Input, kind, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }

    /// `error: category=<c> kind=<k> message=<json string>` on one line.
    pub fn line(&self) -> String {
        format!(
            "error: category={} kind={} message={}",
            self.category.as_str(),
            self.kind,
            serde_json::to_string(&self.message).expect("string serializes")
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

/// Leading identifier of a Debug rendering, i.e. the variant name.
fn variant<T: fmt::Debug>(e: &T) -> String {
    format!("{e:?}").chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
}

fn leaf<T: fmt::Debug + fmt::Display>(category: Category, e: &T) -> CliError {
    CliError::new(category, variant(e), e.to_string())
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        use DataError::*;
        let c = match &e {
            BadMagic { .. } | UnsupportedVersion(_) | BadHeader(_) | UnknownSample(_) | TruncatedFile { .. }
            | BadSampleLine { .. } | Io(_) => Category::Input,
            CorruptTensor { .. } | HeterogeneousShape(_) | DuplicateSampleId(_) | InvalidLogProb { .. }
            | InvalidShape(_) | InvalidLabel(_) | EmptySequence | TokenOutOfVocab { .. } => Category::Data,
        };
        leaf(c, &e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        use ModelError::*;
        match e {
            Data(d) => d.into(),
            InvalidConfig(_) | MissingTensor(_) | ShapeMismatch { .. } | Io(_) => leaf(Category::Input, &e),
            NonFiniteWeight(_) | TokenOutOfVocab { .. } | SequenceTooLong { .. } => leaf(Category::Data, &e),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        use FeatureError::*;
        let c = match &e {
            IndexOutOfRange { .. } | SchemaMismatch { .. } | BadFile(_) | Io(_) => Category::Input,
            TooFewLayers(_) | SampleSetMismatch(_) | LengthMismatch { .. } | NonFinite { .. } => Category::Data,
            SchemaCollision(_) => Category::Internal,
        };
        leaf(c, &e)
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        leaf(Category::Data, &e)
    }
}

impl From<PerturbError> for CliError {
    fn from(e: PerturbError) -> Self {
        use PerturbError::*;
        match e {
            Model(m) => m.into(),
            Feature(f) => f.into(),
            Data(d) => d.into(),
            InvalidPositions(_) | InvalidSpec(_) | KMaxTooLarge { .. } => leaf(Category::Input, &e),
            EmptyResult | EmptyAlignment | ShapeMismatch(_) | MissingPerturbed(_) => leaf(Category::Data, &e),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        use ClassifierError::*;
        match e {
            Feature(f) => f.into(),
            Data(d) => d.into(),
            InvalidConfig(_) | SchemaMismatch { .. } | BadModel(_) => leaf(Category::Input, &e),
            SingleClassFold { .. } | LabelCount { .. } | InvalidLabel(_) => leaf(Category::Data, &e),
            NonFiniteLoss { .. } => leaf(Category::Internal, &e),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        use PipelineError::*;
        match e {
            Feature(f) => f.into(),
            Perturb(p) => p.into(),
            Data(d) => d.into(),
            NoFamilies | LayerOutOfRange { .. } | ZeroLength | MissingPerturbedDump => leaf(Category::Input, &e),
            InconsistentSchema(_) => leaf(Category::Data, &e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Perturb(p) => p.into(),
            SynthError::Data(d) => d.into(),
            SynthError::InvalidShape(_) => leaf(Category::Input, &e),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        use BaselineError::*;
        let c = match &e {
            InvalidK(_) | MissingRequiredRecord(_) => Category::Input,
            EmptyRecord(_) | EmptyText | LengthMismatch(_) | ZeroDenominator(_) => Category::Data,
        };
        leaf(c, &e)
    }
}

impl From<ExtractionError> for CliError {
    fn from(e: ExtractionError) -> Self {
        use ExtractionError::*;
        match e {
            Baseline(b) => b.into(),
            Pipeline(p) => p.into(),
            Classifier(c) => c.into(),
            Data(d) => d.into(),
            BadCorpus { .. } | DuplicateCandidate(_) | MissingDump { .. } | SchemaMismatch(_)
            | SelectionTooLarge { .. } => leaf(Category::Input, &e),
            PlanMismatch { .. } => leaf(Category::Data, &e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        DataError::from(e).into()
    }
}
