use super::{Fact, FactKind, FactSet, ImportBinding};

/// Rewrite every fact rooted at an import alias to its fully qualified path.
///
/// Names with no import binding (builtins, locals, undefined names) are kept
/// verbatim with `resolved = false`. Applying this to an already resolved
/// set is a no-op.
pub fn resolve_aliases(mut raw: FactSet) -> FactSet {
    if raw.aliases_resolved {
        return raw;
    }
    let bindings = std::mem::take(&mut raw.bindings);
    for fact in &mut raw.facts {
        resolve_fact(fact, &bindings);
    }
    raw.bindings = bindings;
    raw.aliases_resolved = true;
    raw
}

fn resolve_fact(fact: &mut Fact, bindings: &[ImportBinding]) {
    match fact.kind {
        FactKind::Import | FactKind::EnvSet => fact.resolved = true,
        FactKind::Call | FactKind::Assign | FactKind::KeywordArg => {
            let (path, ok) = resolve_path(&fact.canonical_path, bindings, fact.location.line);
            fact.canonical_path = path;
            fact.resolved = ok;
        }
    }
}

/// Resolve the root name of `path` against import bindings.
///
/// The binding nearest before `line` wins; failing that, the first binding
/// after it (flow-insensitive fallback for imports placed below their use).
pub(crate) fn resolve_path(path: &str, bindings: &[ImportBinding], line: u32) -> (String, bool) {
    let split = path.find(['.', '#']).unwrap_or(path.len());
    let (root, rest) = path.split_at(split);

    let mut before: Option<&ImportBinding> = None;
    let mut after: Option<&ImportBinding> = None;
    for b in bindings.iter().filter(|b| b.name == root) {
        if b.line <= line {
            before = Some(b);
        } else if after.is_none() {
            after = Some(b);
        }
    }
    match before.or(after) {
        Some(b) => (format!("{}{rest}", b.target), true),
        None => (path.to_string(), false),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_source, Literal};
    use super::*;

    fn resolved(src: &str) -> FactSet {
        resolve_aliases(parse_source(src.as_bytes(), "t.py").unwrap())
    }

    fn find(fs: &FactSet, kind: FactKind) -> Vec<&Fact> {
        fs.facts_of(kind).collect()
    }

    #[test]
    fn numpy_alias() {
        let fs = resolved("import numpy as np\nnp.random.seed(SEED)\n");
        let call = find(&fs, FactKind::Call)[0];
        assert_eq!(call.canonical_path, "numpy.random.seed");
        assert!(call.resolved);
    }

    #[test]
    fn identity_alias() {
        let fs = resolved("import torch as torch\ntorch.manual_seed(0)\n");
        assert_eq!(find(&fs, FactKind::Call)[0].canonical_path, "torch.manual_seed");
    }

    #[test]
    fn from_import_alias_on_assignment() {
        let fs = resolved("from torch.backends import cudnn\ncudnn.benchmark = False\n");
        let a = find(&fs, FactKind::Assign)[0];
        assert_eq!(a.canonical_path, "torch.backends.cudnn.benchmark");
        assert_eq!(a.value, Some(Literal::Bool(false)));
    }

    #[test]
    fn keyword_arg_callee_is_resolved() {
        let fs = resolved("import xgboost as xgb\nxgb.train(p, d, single_precision_histogram=True)\n");
        assert_eq!(
            find(&fs, FactKind::KeywordArg)[0].canonical_path,
            "xgboost.train#single_precision_histogram"
        );
    }

    #[test]
    fn unknown_roots_are_kept_and_flagged() {
        let fs = resolved("session_config.intra_op_parallelism_threads = 1\nprint(1)\n");
        for f in &fs.facts {
            assert!(!f.resolved, "{f:?}");
        }
        assert_eq!(fs.facts[0].canonical_path, "session_config.intra_op_parallelism_threads");
    }

    #[test]
    fn rebinding_uses_nearest_preceding_import() {
        let fs = resolved("import numpy as np\nnp.a()\nimport jax.numpy as np\nnp.b()\n");
        let calls: Vec<_> = find(&fs, FactKind::Call).iter().map(|f| f.canonical_path.clone()).collect();
        assert_eq!(calls, ["numpy.a", "jax.numpy.b"]);
    }

    #[test]
    fn import_below_use_still_resolves() {
        let fs = resolved("def f():\n    T.manual_seed(0)\nimport torch as T\n");
        assert_eq!(find(&fs, FactKind::Call)[0].canonical_path, "torch.manual_seed");
    }

    #[test]
    fn submodule_import_binds_top_name() {
        let fs = resolved("import torch.nn\ntorch.nn.MaxPool3d(2)\n");
        assert_eq!(find(&fs, FactKind::Call)[0].canonical_path, "torch.nn.MaxPool3d");
        let fs = resolved("from torch.nn import MaxPool3d as MP\nMP(2)\n");
        assert_eq!(find(&fs, FactKind::Call)[0].canonical_path, "torch.nn.MaxPool3d");
    }

    #[test]
    fn resolution_is_idempotent() {
        let once = resolved("import numpy as np\nnp.random.seed(1)\n");
        let twice = resolve_aliases(once.clone());
        assert_eq!(once, twice);
    }
}
