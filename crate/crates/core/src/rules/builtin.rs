use crate::facts::Literal;

use super::{Activation, Library, Matcher, Rule, RuleCatalog, RuleKind, Severity};

pub const BUILTIN_CATALOG_VERSION: &str = "1.0.0";

/// Ids of the built-in rules. Part of the external contract: reports, rule
/// files and CI configuration refer to them.
pub const BUILTIN_RULE_IDS: &[&str] = &[
    "dask-multi-gpu-warning",
    "general-numpy-seed",
    "general-pythonhashseed",
    "general-random-seed",
    "pytorch-cudnn-benchmark",
    "pytorch-cudnn-deterministic",
    "pytorch-forbidden-convtranspose3d",
    "pytorch-forbidden-maxpool3d",
    "pytorch-manual-seed",
    "pytorch-set-deterministic",
    "tensorflow-deterministic-ops",
    "tensorflow-inter-op-threads",
    "tensorflow-intra-op-threads",
    "tensorflow-random-seed",
    "xgboost-forbidden-allreduce",
    "xgboost-param-seed",
    "xgboost-single-precision",
];

const ML_LIBRARIES: &[&str] = &["torch", "tensorflow", "xgboost"];

struct Spec {
    id: &'static str,
    library: Library,
    kind: RuleKind,
    paths: &'static [&'static str],
    value: Option<Literal>,
    severity: Severity,
    modules: &'static [&'static str],
    message: &'static str,
    fix_hint: &'static str,
    anchor: &'static str,
}

impl Spec {
    fn build(self) -> Rule {
        let mut matcher = Matcher::new(self.paths.iter().copied());
        matcher.value = self.value;
        Rule {
            id: self.id.to_string(),
            library: self.library,
            kind: self.kind,
            matcher,
            severity: self.severity,
            message: self.message.to_string(),
            fix_hint: self.fix_hint.to_string(),
            activation: Activation::LibraryImported,
            modules: self.modules.iter().map(|m| m.to_string()).collect(),
            paper_anchor: self.anchor.to_string(),
        }
    }
}

fn specs() -> Vec<Spec> {
    use Library::*;
    use RuleKind::*;
    use Severity::*;
    vec![
        Spec {
            id: "general-pythonhashseed",
            library: General,
            kind: RequiredEnv,
            paths: &["env:PYTHONHASHSEED"],
            value: None,
            severity: Error,
            modules: ML_LIBRARIES,
            message: "PYTHONHASHSEED is never set; hash-based ordering differs between interpreter runs",
            fix_hint: "add `os.environ['PYTHONHASHSEED'] = str(SEED)` before any training code runs",
            anchor: "os.environ['PYTHONHASHSEED'] = SEED",
        },
        Spec {
            id: "general-random-seed",
            library: General,
            kind: RequiredCall,
            paths: &["random.seed"],
            value: None,
            severity: Error,
            modules: &["random"],
            message: "the `random` module is imported but never seeded",
            fix_hint: "call `random.seed(SEED)` during setup",
            anchor: "random.seed(SEED)",
        },
        Spec {
            id: "general-numpy-seed",
            library: General,
            kind: RequiredCall,
            paths: &["numpy.random.seed"],
            value: None,
            severity: Error,
            modules: &["numpy"],
            message: "numpy is imported but its global random generator is never seeded",
            fix_hint: "call `np.random.seed(SEED)` during setup",
            anchor: "np.random.seed(SEED)",
        },
        Spec {
            id: "pytorch-manual-seed",
            library: Pytorch,
            kind: RequiredCall,
            paths: &["torch.manual_seed"],
            value: None,
            severity: Error,
            modules: &[],
            message: "torch is imported but `torch.manual_seed` is never called",
            fix_hint: "call `torch.manual_seed(SEED)`; it seeds the CPU and all CUDA devices",
            anchor: "torch.manual_seed(SEED)",
        },
        Spec {
            id: "pytorch-cudnn-deterministic",
            library: Pytorch,
            kind: RequiredAssign,
            paths: &["torch.backends.cudnn.deterministic"],
            value: Some(Literal::Bool(true)),
            severity: Error,
            modules: &[],
            message: "cuDNN may select non-deterministic algorithms",
            fix_hint: "set `torch.backends.cudnn.deterministic = True`",
            anchor: "torch.backends.cudnn.deterministic = True",
        },
        Spec {
            id: "pytorch-cudnn-benchmark",
            library: Pytorch,
            kind: RequiredAssign,
            paths: &["torch.backends.cudnn.benchmark"],
            value: Some(Literal::Bool(false)),
            severity: Error,
            modules: &[],
            message: "the cuDNN auto-tuner is not disabled; it picks the fastest kernel per hardware, not a deterministic one",
            fix_hint: "set `torch.backends.cudnn.benchmark = False`",
            anchor: "torch.backends.cudnn.benchmark = False",
        },
        Spec {
            id: "pytorch-set-deterministic",
            library: Pytorch,
            kind: RequiredCall,
            paths: &["torch.set_deterministic", "torch.use_deterministic_algorithms"],
            value: None,
            severity: Warning,
            modules: &[],
            message: "PyTorch is not told to reject operations without deterministic implementations",
            fix_hint: "call `torch.use_deterministic_algorithms(True)` (`torch.set_deterministic(True)` on PyTorch 1.7)",
            anchor: "torch.set_deterministic(True)",
        },
        Spec {
            id: "pytorch-forbidden-maxpool3d",
            library: Pytorch,
            kind: ForbiddenCall,
            paths: &[
                "torch.nn.MaxPool3d",
                "torch.nn.MaxPool3d.*",
                "torch.nn.modules.pooling.MaxPool3d",
            ],
            value: None,
            severity: Error,
            modules: &[],
            message: "torch.nn.MaxPool3d has no deterministic CUDA backward implementation",
            fix_hint: "down-sample with a strided convolution (e.g. `nn.Conv3d(..., stride=2)`) instead",
            anchor: "torch.nn.MaxPool3d",
        },
        Spec {
            id: "pytorch-forbidden-convtranspose3d",
            library: Pytorch,
            kind: ForbiddenCall,
            paths: &[
                "torch.nn.ConvTranspose3d",
                "torch.nn.ConvTranspose3d.*",
                "torch.nn.modules.conv.ConvTranspose3d",
            ],
            value: None,
            severity: Error,
            modules: &[],
            message: "torch.nn.ConvTranspose3d has no deterministic CUDA implementation",
            fix_hint: "up-sample with a deterministic interpolation followed by a convolution instead",
            anchor: "torch.nn.ConvTranspose3d",
        },
        Spec {
            id: "tensorflow-random-seed",
            library: Tensorflow,
            kind: RequiredCall,
            paths: &[
                "tensorflow.random.set_seed",
                "tensorflow.compat.v1.set_random_seed",
                "tensorflow.compat.v1.random.set_random_seed",
            ],
            value: None,
            severity: Error,
            modules: &[],
            message: "tensorflow is imported but its global seed is never set",
            fix_hint: "call `tf.random.set_seed(SEED)`",
            anchor: "tf.random.set_seed(SEED)",
        },
        Spec {
            id: "tensorflow-deterministic-ops",
            library: Tensorflow,
            kind: RequiredEnv,
            paths: &["env:TF_DETERMINISTIC_OPS"],
            value: Some(Literal::Str("1".into())),
            severity: Error,
            modules: &[],
            message: "TF_DETERMINISTIC_OPS is not set to '1'; GPU kernels may use atomic reductions",
            fix_hint: "add `os.environ['TF_DETERMINISTIC_OPS'] = '1'` before tensorflow builds any graph",
            anchor: "os.environ['TF_DETERMINISTIC_OPS'] = '1'",
        },
        Spec {
            id: "tensorflow-intra-op-threads",
            library: Tensorflow,
            kind: RequiredAssign,
            paths: &["*.intra_op_parallelism_threads", "*#intra_op_parallelism_threads"],
            value: Some(Literal::Int(1)),
            severity: Warning,
            modules: &[],
            message: "intra-op parallelism is not pinned to one thread; CPU reductions may reorder",
            fix_hint: "set `intra_op_parallelism_threads = 1` on the session config",
            anchor: "intra_op_parallelism_threads = 1",
        },
        Spec {
            id: "tensorflow-inter-op-threads",
            library: Tensorflow,
            kind: RequiredAssign,
            paths: &["*.inter_op_parallelism_threads", "*#inter_op_parallelism_threads"],
            value: Some(Literal::Int(1)),
            severity: Warning,
            modules: &[],
            message: "inter-op parallelism is not pinned to one thread; op scheduling may reorder",
            fix_hint: "set `inter_op_parallelism_threads = 1` on the session config",
            anchor: "inter_op_parallelism_threads = 1",
        },
        Spec {
            id: "xgboost-param-seed",
            library: Xgboost,
            kind: RequiredKeywordArg,
            paths: &["dict#seed", "xgboost.*#seed", "xgboost.*#random_state"],
            value: None,
            severity: Error,
            modules: &[],
            message: "no `seed` entry found in the XGBoost training parameters",
            fix_hint: "add `'seed': SEED` to the params mapping passed to `xgb.train`",
            anchor: "param = {'seed': SEED,",
        },
        Spec {
            id: "xgboost-single-precision",
            library: Xgboost,
            kind: RuleKind::AdvisoryPattern,
            paths: &["*#single_precision_histogram"],
            value: Some(Literal::Bool(true)),
            severity: Warning,
            modules: &[],
            message: "single-precision histograms trade precision for speed",
            fix_hint: "only deterministic on XGBoost >= 1.1.0 (hist/gpu_hist accumulated floating-point error before); pin the version or disable it",
            anchor: "'single_precision_histogram': True",
        },
        Spec {
            id: "xgboost-forbidden-allreduce",
            library: Xgboost,
            kind: ForbiddenCall,
            paths: &[
                "xgboost.rabit.allreduce",
                "xgboost.rabit.allreduce.*",
                "xgboost.collective.allreduce",
                "xgboost.collective.allreduce.*",
                "rabit.allreduce",
            ],
            value: None,
            severity: Error,
            modules: &["xgboost", "rabit"],
            message: "rabit allreduce is not verified to reduce deterministically",
            fix_hint: "aggregate on a single worker or reduce in a fixed order yourself",
            anchor: "allreduce",
        },
        Spec {
            id: "dask-multi-gpu-warning",
            library: General,
            kind: RuleKind::AdvisoryPattern,
            paths: &[
                "dask_cuda.LocalCUDACluster",
                "dask.dataframe.from_pandas",
                "dask.dataframe.from_array",
                "dask.dataframe.read_*",
                "dask_cudf.from_cudf",
                "dask_cudf.read_*",
                "xgboost.dask.*",
            ],
            value: None,
            severity: Warning,
            modules: &["dask", "dask_cuda", "dask_cudf", "xgboost"],
            message: "data distribution across Dask workers is not deterministic",
            fix_hint: "train on a single worker, or persist a fixed partitioning and verify results across runs",
            anchor: "LocalCUDACluster",
        },
    ]
}

/// The built-in catalog.
pub fn builtin_rules() -> RuleCatalog {
    let version = semver::Version::parse(BUILTIN_CATALOG_VERSION).expect("valid catalog version");
    let mut catalog = RuleCatalog::new(version);
    for spec in specs() {
        let replaced = catalog.insert(spec.build());
        debug_assert!(replaced.is_none(), "duplicate built-in rule id");
    }
    catalog
}
