//! The five pipeline stages. Each reads files, writes files and returns the
//! warnings it wants reflected in the exit status.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bloomlo::agreement::{
    agreement_report, import_annotations, AgreementReport, Exclusion, ExclusionReason, GroupMapping,
};
use bloomlo::analysis::{import_external_classifications, LintConfig};
use bloomlo::bundle::{analyze_corpus, AnalysisBundle};
use bloomlo::lexicon::VerbLexicon;
use bloomlo::llm::{record, ChatRequest, ChatResponse, Client, FinishReason, ProviderConfig};
use bloomlo::matrix::LevelKindMatrix;
use bloomlo::model::{read_corpus, write_corpus};
use bloomlo::parser::{parse_corpus, ParseReport};
use bloomlo::prompt::PromptBuilder;
use bloomlo::{CourseSpec, GenerationParams, ModuleKind, ModuleSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type Warnings = Vec<String>;

/// Share of annotation lo_ids that may fail to resolve before `agree` warns.
pub const UNRESOLVED_WARNING_RATIO: f64 = 0.10;

/// Writes through a temporary sibling so a failed run never leaves a
/// truncated artifact behind.
pub fn write_output(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", path.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_output(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_course(path: &Path) -> Result<CourseSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading course {}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    CourseSpec::parse(&text, is_toml).with_context(|| format!("parsing course {}", path.display()))
}

pub fn load_lexicon(path: Option<&Path>) -> Result<VerbLexicon> {
    match path {
        None => Ok(VerbLexicon::bundled()),
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading lexicon {}", path.display()))?;
            VerbLexicon::parse(&text).with_context(|| format!("parsing lexicon {}", path.display()))
        }
    }
}

fn read_optional_template(path: Option<&PathBuf>) -> Result<Option<String>> {
    path.map(|p| fs::read_to_string(p).with_context(|| format!("reading template {}", p.display())))
        .transpose()
}

/// One module's outcome in `completions.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleCompletion {
    pub module_id: String,
    pub module_name: String,
    pub module_kind: ModuleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_prompt_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<FinishReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionsFile {
    pub course_name: String,
    pub model_name: String,
    pub modules: Vec<ModuleCompletion>,
}

pub struct GenerateArgs<'a> {
    pub course: &'a Path,
    pub out: &'a Path,
    pub provider: ProviderConfig,
    pub params: GenerationParams,
    pub parallel: usize,
    pub record_store: Option<&'a Path>,
    pub system_prompt: Option<&'a PathBuf>,
    pub user_template: Option<&'a PathBuf>,
}

fn generate_one(
    builder: &PromptBuilder,
    client: &Client,
    course: &CourseSpec,
    module: &ModuleSpec,
    params: &GenerationParams,
) -> (ModuleCompletion, Option<(ChatRequest, ChatResponse)>) {
    let mut entry = ModuleCompletion {
        module_id: module.module_id.clone(),
        module_name: module.name.clone(),
        module_kind: module.kind,
        request_key: None,
        estimated_prompt_tokens: None,
        provider_label: None,
        finish_reason: None,
        completion_text: None,
        error: None,
    };
    let pair = match builder.build(course, module, params) {
        Ok(pair) => pair,
        Err(e) => {
            entry.error = Some(e.to_string());
            return (entry, None);
        }
    };
    entry.estimated_prompt_tokens = Some(pair.estimated_tokens);
    let request = ChatRequest::new(pair.system_text, pair.user_text, params.clone());
    entry.request_key = Some(request.request_key.clone());
    match client.complete(&request) {
        Ok(response) => {
            entry.provider_label = Some(response.provider_label.clone());
            entry.finish_reason = Some(response.finish_reason.clone());
            entry.completion_text = Some(response.completion_text.clone());
            (entry, Some((request, response)))
        }
        Err(e) => {
            entry.error = Some(e.to_string());
            (entry, None)
        }
    }
}

pub fn generate(args: GenerateArgs) -> Result<Warnings> {
    let course = load_course(args.course)?;
    let system = read_optional_template(args.system_prompt)?;
    let user = read_optional_template(args.user_template)?;
    let builder = PromptBuilder::new(system.as_deref(), user.as_deref())?;
    if args.record_store.is_some() && !matches!(args.provider, ProviderConfig::Live { .. }) {
        bail!("--record needs a live provider");
    }
    let client = Client::new(&args.provider)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.parallel.max(1))
        .build()?;
    let results: Vec<_> = pool.install(|| {
        course
            .modules
            .par_iter()
            .map(|m| generate_one(&builder, &client, &course, m, &args.params))
            .collect()
    });

    let mut warnings = Warnings::new();
    let mut failed = 0;
    let mut modules = Vec::with_capacity(results.len());
    for (entry, exchange) in results {
        match (&entry.error, &entry.finish_reason) {
            (Some(error), _) => {
                failed += 1;
                eprintln!("{}: FAILED: {error}", entry.module_id);
            }
            (None, Some(reason)) => {
                let chars = entry.completion_text.as_deref().map_or(0, |t| t.chars().count());
                eprintln!("{}: ok, {chars} chars, finish {reason:?}", entry.module_id);
                if *reason != FinishReason::Stop {
                    warnings.push(format!("{}: finish reason {reason:?}", entry.module_id));
                }
            }
            (None, None) => unreachable!("a completion always carries a finish reason"),
        }
        if let (Some(store), Some((request, response))) = (args.record_store, &exchange) {
            record(request, response, store)?;
        }
        modules.push(entry);
    }

    write_json(
        args.out,
        &CompletionsFile {
            course_name: course.course_name.clone(),
            model_name: args.params.model_name.clone(),
            modules,
        },
    )?;
    if failed > 0 {
        bail!("{failed} of {} module(s) failed", course.modules.len());
    }
    Ok(warnings)
}

pub fn parse(completions: &Path, out: &Path, report_path: &Path) -> Result<Warnings> {
    let file: CompletionsFile = read_json(completions)?;
    let ids: BTreeSet<&str> = file.modules.iter().map(|m| m.module_id.as_str()).collect();
    if ids.len() != file.modules.len() {
        bail!("{}: module ids are not distinct", completions.display());
    }
    let (corpus, report) = parse_corpus(
        file.modules
            .iter()
            .map(|m| (m.module_id.as_str(), m.completion_text.as_deref().unwrap_or(""))),
    );
    let mut buffer = Vec::new();
    write_corpus(&mut buffer, &corpus)?;
    write_output(out, &buffer)?;
    write_json(report_path, &report)?;
    Ok(parse_warnings(&report))
}

fn parse_warnings(report: &ParseReport) -> Warnings {
    let mut warnings = Warnings::new();
    for m in report.failed_modules() {
        warnings.push(format!("{}: {}", m.module_id, m.error.as_deref().unwrap_or_default()));
    }
    for m in report.out_of_range_modules() {
        warnings.push(format!("{}: {} items, outside the expected 5-10", m.module_id, m.item_count));
    }
    warnings
}

pub struct AnalyzeArgs<'a> {
    pub course: &'a Path,
    pub corpus: &'a Path,
    pub external: Option<&'a Path>,
    pub lexicon: Option<&'a Path>,
    pub lint: &'a LintConfig,
    pub fractional: bool,
    pub out: &'a Path,
}

pub fn analyze(args: AnalyzeArgs) -> Result<Warnings> {
    let lexicon = load_lexicon(args.lexicon)?;
    let course = load_course(args.course)?;
    let reader = fs::File::open(args.corpus)
        .with_context(|| format!("reading corpus {}", args.corpus.display()))?;
    let corpus = read_corpus(std::io::BufReader::new(reader))
        .with_context(|| format!("parsing corpus {}", args.corpus.display()))?;
    let external = match args.external {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
            Some(
                import_external_classifications(file)
                    .with_context(|| format!("parsing {}", path.display()))?,
            )
        }
        None => None,
    };
    let bundle = analyze_corpus(&corpus, &course, &lexicon, external.as_deref(), args.lint, args.fractional)?;
    write_json(args.out, &bundle)?;
    let mut warnings = Warnings::new();
    if !bundle.external_missing.is_empty() {
        warnings.push(format!(
            "{} LO(s) have no external classification",
            bundle.external_missing.len()
        ));
    }
    Ok(warnings)
}

pub fn agree(annotations: &Path, bundle_path: &Path, mapping: GroupMapping, out: &Path) -> Result<Warnings> {
    let bundle: AnalysisBundle = read_json(bundle_path)?;
    let file = fs::File::open(annotations).with_context(|| format!("reading {}", annotations.display()))?;
    let records = import_annotations(file).with_context(|| format!("parsing {}", annotations.display()))?;

    let kinds = bundle.kinds();
    let (resolved, unresolved): (Vec<_>, Vec<_>) =
        records.into_iter().partition(|r| kinds.contains_key(r.lo_id.as_str()));
    let unresolved_ids: BTreeSet<String> = unresolved.into_iter().map(|r| r.lo_id).collect();
    let resolved_ids: BTreeSet<&str> = resolved.iter().map(|r| r.lo_id.as_str()).collect();
    if resolved.is_empty() {
        return Err(anyhow!(bloomlo::Error::EmptyOverlap))
            .context("no annotation lo_id matches an LO in the bundle");
    }

    let (source, autos) = bundle.auto_assignments();
    let mut report: AgreementReport =
        agreement_report(&resolved, &autos, source, mapping, |id| kinds.get(id).copied())?;
    report.excluded_items.extend(unresolved_ids.iter().map(|id| Exclusion {
        lo_id: id.clone(),
        reason: ExclusionReason::UnresolvedLoId,
    }));
    report.excluded_items.sort();
    write_json(out, &report)?;

    let mut warnings = Warnings::new();
    let total = unresolved_ids.len() + resolved_ids.len();
    if !unresolved_ids.is_empty() {
        let listed: Vec<&str> = unresolved_ids.iter().map(String::as_str).collect();
        eprintln!("unresolved lo_ids excluded: {}", listed.join(", "));
        if unresolved_ids.len() as f64 > UNRESOLVED_WARNING_RATIO * total as f64 {
            warnings.push(format!(
                "{} of {total} annotated lo_ids do not resolve against the bundle",
                unresolved_ids.len()
            ));
        }
    }
    Ok(warnings)
}

fn matrix_table(matrix: &LevelKindMatrix, value_header: &str) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["level", "kind", value_header])?;
    for cell in matrix.cells(true) {
        writer.write_record([cell.level.to_string(), cell.kind.to_string(), cell.value.to_string()])?;
    }
    Ok(writer.into_inner()?)
}

pub const VERBS_TABLE: &str = "verbs_by_kind.csv";
pub const AUTO_TABLE: &str = "bloom_by_kind_auto.csv";
pub const HUMAN_TABLE: &str = "bloom_by_kind_human_normalized.csv";

pub fn report(bundle_path: &Path, agreement: Option<&Path>, out_dir: &Path) -> Result<Warnings> {
    let bundle: AnalysisBundle = read_json(bundle_path)?;
    let agreement: Option<AgreementReport> = agreement.map(read_json).transpose()?;

    let mut verbs = csv::Writer::from_writer(Vec::new());
    verbs.write_record(["verb", "kind", "count"])?;
    for (kind, counts) in &bundle.verb_frequency {
        for (verb, count) in counts {
            verbs.write_record([verb.as_str(), kind.label(), &count.to_string()])?;
        }
    }
    write_output(&out_dir.join(VERBS_TABLE), &verbs.into_inner()?)?;
    write_output(&out_dir.join(AUTO_TABLE), &matrix_table(bundle.auto_matrix(), "count")?)?;
    if let Some(agreement) = agreement {
        write_output(&out_dir.join(HUMAN_TABLE), &matrix_table(&agreement.normalized_matrix, "weight")?)?;
    }
    Ok(Warnings::new())
}
