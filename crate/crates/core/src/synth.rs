//! Seeded synthetic datasets with confusable categories.
//!
//! Every category gets a unit prototype. Categories in a confusable pair
//! share the first half of their prototype, so their entities sit close in
//! embedding space while differing on category. Positives are same-category
//! applications; most negatives come from the confusable partner.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    check_temporal, write_pairs, CategoryVocab, DataDir, Dataset, EntityKind, EntityRecord, Pair, DEFAULT_CATEGORIES,
};
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::numerics::matrix::dot;
use crate::numerics::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_candidates: usize,
    pub n_jobs: usize,
    pub embedding_dim: usize,
    pub categories: Vec<String>,
    /// Pairs of category names sharing half of their prototype.
    pub confusable_pairs: Vec<(String, String)>,
    /// Per-coordinate standard deviation of the embedding noise.
    pub prototype_noise: f64,
    pub short_jd_fraction: f64,
    pub applications_per_job: usize,
    /// Share of a job's applicants from its own category.
    pub same_category_share: f64,
    /// Share from the confusable partner category (unrelated categories when there is none).
    pub confusable_share: f64,
    /// Probability that a same-category application is still rejected.
    pub label_noise: f64,
    /// Probability that a rejected application passed the resume evaluation.
    pub pass_eval_given_negative: f64,
    /// Leading share of the timeline that only populates histories.
    pub history_fraction: f64,
    /// Trailing share of the emitted pairs (by time) held out for testing.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_candidates: 2000,
            n_jobs: 400,
            embedding_dim: 32,
            categories: DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            confusable_pairs: [
                ("Data", "Technology"),
                ("Product", "Project management"),
                ("Marketing", "Advertising"),
                ("Logistics", "Supply Chain"),
                ("Risk management", "Operations"),
                ("Content", "Design"),
                ("Sales", "Customer Experience"),
            ]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
            prototype_noise: 0.3,
            short_jd_fraction: 0.25,
            applications_per_job: 60,
            same_category_share: 0.4,
            confusable_share: 0.4,
            label_noise: 0.2,
            pass_eval_given_negative: 0.3,
            history_fraction: 1.0 / 6.0,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<CategoryVocab> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let vocab = CategoryVocab::new(self.categories.clone())?;
        if self.n_candidates < 2 || self.n_jobs == 0 || self.embedding_dim < 2 || self.applications_per_job == 0 {
            return bad("n_candidates >= 2, n_jobs, embedding_dim >= 2 and applications_per_job must be set");
        }
        for f in [
            self.short_jd_fraction,
            self.same_category_share,
            self.confusable_share,
            self.label_noise,
            self.pass_eval_given_negative,
            self.history_fraction,
            self.test_fraction,
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad("fractions must lie in [0, 1]");
            }
        }
        if self.same_category_share + self.confusable_share > 1.0 {
            return bad("same_category_share + confusable_share must not exceed 1");
        }
        if !(self.prototype_noise >= 0.0) {
            return bad("prototype_noise must be non-negative");
        }
        if self.history_fraction + self.test_fraction >= 1.0 {
            return bad("history_fraction + test_fraction must be below 1");
        }
        let mut used = vec![false; vocab.len()];
        for (a, b) in &self.confusable_pairs {
            let (Some(x), Some(y)) = (vocab.id(a), vocab.id(b)) else {
                return Err(Error::Config(format!("confusable pair ({a}, {b}) names an unknown category")));
            };
            if x == y || used[x] || used[y] {
                return Err(Error::Config(format!("category in confusable pair ({a}, {b}) is reused")));
            }
            used[x] = true;
            used[y] = true;
        }
        Ok(vocab)
    }
}

/// Composition of a generated dataset, written next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMetadata {
    pub seed: u64,
    pub n_candidates: usize,
    pub n_jobs: usize,
    pub embedding_dim: usize,
    pub n_history_applications: usize,
    pub n_train_pairs: usize,
    pub n_test_pairs: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Share of emitted negatives whose candidate is from the job's confusable partner category.
    pub hard_negative_fraction: f64,
    pub short_jd_threshold: usize,
    pub short_jd_share: f64,
    /// Test AUC of raw resume/JD embedding cosine similarity.
    pub cosine_baseline_auc: f64,
    pub history_cutoff: i64,
    pub test_cutoff: i64,
    pub config: SynthConfig,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Entities with the training pairs.
    pub dataset: Dataset,
    pub test: Vec<Pair>,
    pub metadata: SynthMetadata,
}

const SHORT_JD_THRESHOLD: usize = 200;
const TIMELINE: i64 = 1_000_000;

fn skills(category: &str) -> &'static [&'static str] {
    match category {
        "Technology" => &["rust", "distributed systems", "kubernetes", "backend services", "algorithms", "code review"],
        "Product" => &["roadmaps", "user research", "requirements", "prioritization", "launch planning", "metrics"],
        "Supply Chain" => &["procurement", "vendor management", "inventory", "demand planning", "sourcing", "forecasting"],
        "Logistics" => &["warehousing", "routing", "fleet scheduling", "last mile delivery", "inventory", "freight"],
        "Content" => &["copywriting", "editing", "storytelling", "content calendars", "video scripts", "style guides"],
        "Customer Experience" => &["support tickets", "customer journeys", "service quality", "escalations", "feedback", "retention"],
        "Marketing" => &["brand strategy", "campaigns", "market research", "positioning", "growth", "segmentation"],
        "Advertising" => &["media buying", "ad campaigns", "bidding", "creative testing", "placement", "segmentation"],
        "Data" => &["sql", "dashboards", "statistics", "experimentation", "data pipelines", "reporting"],
        "Gaming" => &["game design", "level design", "live operations", "player economy", "unity", "balancing"],
        "General" => &["administration", "coordination", "scheduling", "documentation", "office management", "budgets"],
        "Design" => &["visual design", "prototyping", "figma", "design systems", "typography", "storytelling"],
        "Operations" => &["process improvement", "compliance", "vendor management", "reporting", "audits", "capacity planning"],
        "Sales" => &["negotiation", "lead generation", "account management", "crm", "quotas", "retention"],
        "Project management" => &["timelines", "stakeholder management", "requirements", "risk tracking", "delivery", "agile"],
        "Risk management" => &["fraud detection", "risk models", "compliance", "audits", "credit policy", "controls"],
        _ => &["communication", "teamwork", "planning", "analysis", "execution", "ownership"],
    }
}

const JD_SENTENCES: [&str; 6] = [
    "The role owns {a} and works closely with partner teams on {b}.",
    "You will drive {a} across the business and improve {b} every quarter.",
    "Experience with {a} is required; familiarity with {b} is a strong plus.",
    "The team values clear writing, careful reviews and steady delivery.",
    "Daily work covers {a}, {b} and regular reporting to the group lead.",
    "We look for someone who can mentor others in {a}.",
];

fn jd_text(rng: &mut SeededRng, category: &str, short: bool) -> String {
    let words = skills(category);
    let pick = |rng: &mut SeededRng| words[rng.below(words.len())];
    let head = format!("{category} specialist wanted. Focus: {} and {}.", pick(rng), pick(rng));
    if short {
        let target = 60 + rng.below(SHORT_JD_THRESHOLD - 80);
        let mut text = head;
        while text.chars().count() < target {
            let extra = format!(" {}.", pick(rng));
            if text.chars().count() + extra.chars().count() >= SHORT_JD_THRESHOLD {
                break;
            }
            text.push_str(&extra);
        }
        return text;
    }
    let target = SHORT_JD_THRESHOLD + 20 + rng.below(200);
    let mut text = head;
    while text.chars().count() < target {
        let s = JD_SENTENCES[rng.below(JD_SENTENCES.len())];
        text.push(' ');
        text.push_str(&s.replace("{a}", pick(rng)).replace("{b}", pick(rng)));
    }
    text
}

fn resume_text(rng: &mut SeededRng, category: &str) -> String {
    let words = skills(category);
    let years = 1 + rng.below(12);
    let a = words[rng.below(words.len())];
    let b = words[rng.below(words.len())];
    let c = words[rng.below(words.len())];
    format!("{years} years in {category}. Worked on {a} and {b}; led projects in {c}.")
}

fn unit(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn random_unit(rng: &mut SeededRng, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        if dot(&v, &v) > 1e-12 {
            unit(&mut v);
            return v;
        }
    }
}

/// One unit prototype per category; confusable partners share the first half.
pub fn category_prototypes(config: &SynthConfig, vocab: &CategoryVocab, rng: &mut SeededRng) -> Vec<Vec<f64>> {
    let d = config.embedding_dim;
    let h = d / 2;
    let partner = partners(config, vocab);
    let mut shared: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    let mut protos = Vec::with_capacity(vocab.len());
    for c in 0..vocab.len() {
        let first = match partner[c] {
            Some(p) if p < c => shared[p].clone().expect("partner drawn first"),
            _ => random_unit(rng, h),
        };
        shared[c] = Some(first.clone());
        let second = random_unit(rng, d - h);
        let mut v: Vec<f64> = first.iter().chain(&second).map(|x| x * std::f64::consts::FRAC_1_SQRT_2).collect();
        unit(&mut v);
        protos.push(v);
    }
    protos
}

fn partners(config: &SynthConfig, vocab: &CategoryVocab) -> Vec<Option<usize>> {
    let mut out = vec![None; vocab.len()];
    for (a, b) in &config.confusable_pairs {
        let (x, y) = (vocab.id(a).expect("validated"), vocab.id(b).expect("validated"));
        out[x] = Some(y);
        out[y] = Some(x);
    }
    out
}

fn embed(rng: &mut SeededRng, proto: &[f64], sigma: f64) -> Vec<f64> {
    let mut v: Vec<f64> = proto.iter().map(|p| p + sigma * rng.normal()).collect();
    unit(&mut v);
    v
}

struct Application {
    candidate: usize,
    job: usize,
    ts: i64,
    label: u8,
    passed_eval: bool,
    hard: bool,
}

pub fn generate_dataset(config: &SynthConfig) -> Result<SynthOutput> {
    let vocab = config.validate()?;
    let root = SeededRng::new(config.seed);
    let n_cat = vocab.len();
    let partner = partners(config, &vocab);
    let protos = category_prototypes(config, &vocab, &mut root.derive(1));

    let mut rng = root.derive(2);
    let cand_cat: Vec<usize> = (0..config.n_candidates).map(|i| i % n_cat).collect();
    let job_cat: Vec<usize> = (0..config.n_jobs).map(|i| i % n_cat).collect();
    let cand_emb: Vec<Vec<f64>> =
        cand_cat.iter().map(|&c| embed(&mut rng, &protos[c], config.prototype_noise)).collect();
    let job_emb: Vec<Vec<f64>> = job_cat.iter().map(|&c| embed(&mut rng, &protos[c], config.prototype_noise)).collect();

    let mut by_cat: Vec<Vec<usize>> = vec![Vec::new(); n_cat];
    for (i, &c) in cand_cat.iter().enumerate() {
        by_cat[c].push(i);
    }

    let mut rng = root.derive(3);
    let mut apps = Vec::with_capacity(config.n_jobs * config.applications_per_job);
    for (j, &jc) in job_cat.iter().enumerate() {
        let mut taken = HashSet::new();
        for _ in 0..config.applications_per_job.min(config.n_candidates) {
            let mut attempts = 0;
            let (candidate, hard) = loop {
                attempts += 1;
                if attempts > 1000 {
                    let c = (0..config.n_candidates).find(|c| !taken.contains(c)).expect("pool larger than applications");
                    taken.insert(c);
                    break (c, partner[jc] == Some(cand_cat[c]));
                }
                let r = rng.uniform(0.0, 1.0);
                let (pool_cat, hard) = if r < config.same_category_share {
                    (Some(jc), false)
                } else if r < config.same_category_share + config.confusable_share {
                    (partner[jc], partner[jc].is_some())
                } else {
                    (None, false)
                };
                let c = match pool_cat {
                    Some(pc) if !by_cat[pc].is_empty() => by_cat[pc][rng.below(by_cat[pc].len())],
                    _ => rng.below(config.n_candidates),
                };
                if !hard && pool_cat.is_none() && cand_cat[c] == jc {
                    continue;
                }
                if taken.insert(c) {
                    break (c, hard);
                }
            };
            let same = cand_cat[candidate] == jc;
            let label = u8::from(same && !rng.chance(config.label_noise));
            let passed_eval = label == 1 || rng.chance(config.pass_eval_given_negative);
            let ts = rng.below(TIMELINE as usize) as i64;
            apps.push(Application { candidate, job: j, ts, label, passed_eval, hard });
        }
    }
    apps.sort_by_key(|a| (a.ts, a.job, a.candidate));

    let history_cutoff = (TIMELINE as f64 * config.history_fraction) as i64;
    let (hist_apps, emitted): (Vec<&Application>, Vec<&Application>) =
        apps.iter().partition(|a| a.ts < history_cutoff);
    let n_test = ((emitted.len() as f64) * config.test_fraction).round() as usize;
    let split = emitted.len() - n_test;
    // Keep the cutoff on a timestamp boundary so train strictly precedes test.
    let mut split_at = split;
    while split_at > 0 && split_at < emitted.len() && emitted[split_at - 1].ts == emitted[split_at].ts {
        split_at -= 1;
    }
    let test_cutoff = emitted.get(split_at).map(|a| a.ts).unwrap_or(TIMELINE);

    let mut cand_hist: Vec<[Vec<String>; 3]> = vec![Default::default(); config.n_candidates];
    let mut job_hist: Vec<[Vec<String>; 3]> = vec![Default::default(); config.n_jobs];
    let cid = |i: usize| format!("c{i:05}");
    let jid = |i: usize| format!("j{i:04}");
    for a in &hist_apps {
        let stages = [true, a.passed_eval, a.label == 1];
        for (s, reached) in stages.into_iter().enumerate() {
            if reached {
                cand_hist[a.candidate][s].push(jid(a.job));
                job_hist[a.job][s].push(cid(a.candidate));
            }
        }
    }

    let mut rng = root.derive(4);
    let mut entities = Vec::with_capacity(config.n_candidates + config.n_jobs);
    for i in 0..config.n_candidates {
        let cat = vocab.name(cand_cat[i]).expect("in range");
        entities.push(EntityRecord {
            id: cid(i),
            kind: EntityKind::Candidate,
            text: resume_text(&mut rng, cat),
            category: cand_cat[i],
            embedding: cand_emb[i].clone(),
            history: std::mem::take(&mut cand_hist[i]),
            augmented: false,
            original_text: None,
        });
    }
    let mut short_order: Vec<usize> = (0..config.n_jobs).collect();
    rng.shuffle(&mut short_order);
    let n_short = (config.n_jobs as f64 * config.short_jd_fraction).round() as usize;
    let mut is_short = vec![false; config.n_jobs];
    for &j in &short_order[..n_short] {
        is_short[j] = true;
    }
    for j in 0..config.n_jobs {
        let cat = vocab.name(job_cat[j]).expect("in range");
        entities.push(EntityRecord {
            id: jid(j),
            kind: EntityKind::Job,
            text: jd_text(&mut rng, cat, is_short[j]),
            category: job_cat[j],
            embedding: job_emb[j].clone(),
            history: std::mem::take(&mut job_hist[j]),
            augmented: false,
            original_text: None,
        });
    }

    let to_pair = |a: &&Application| Pair { candidate_id: cid(a.candidate), job_id: jid(a.job), label: a.label, ts: a.ts };
    let train: Vec<Pair> = emitted[..split_at].iter().map(to_pair).collect();
    let test: Vec<Pair> = emitted[split_at..].iter().map(to_pair).collect();
    check_temporal(&train, &test)?;

    let negatives: Vec<&&Application> = emitted.iter().filter(|a| a.label == 0).collect();
    let hard = negatives.iter().filter(|a| a.hard).count();
    let test_apps = &emitted[split_at..];
    let cos: Vec<f64> = test_apps.iter().map(|a| dot(&cand_emb[a.candidate], &job_emb[a.job])).collect();
    let labels: Vec<u8> = test_apps.iter().map(|a| a.label).collect();
    let cosine_baseline_auc = auc(&cos, &labels).unwrap_or(f64::NAN);

    let n_positive = emitted.iter().filter(|a| a.label == 1).count();
    let metadata = SynthMetadata {
        seed: config.seed,
        n_candidates: config.n_candidates,
        n_jobs: config.n_jobs,
        embedding_dim: config.embedding_dim,
        n_history_applications: hist_apps.len(),
        n_train_pairs: train.len(),
        n_test_pairs: test.len(),
        n_positive,
        n_negative: emitted.len() - n_positive,
        hard_negative_fraction: if negatives.is_empty() { 0.0 } else { hard as f64 / negatives.len() as f64 },
        short_jd_threshold: SHORT_JD_THRESHOLD,
        short_jd_share: n_short as f64 / config.n_jobs as f64,
        cosine_baseline_auc,
        history_cutoff,
        test_cutoff,
        config: config.clone(),
    };
    let dataset = Dataset::from_parts(vocab, config.embedding_dim, entities, train)?;
    Ok(SynthOutput { dataset, test, metadata })
}

/// Writes entities, train/test pairs and metadata into `dir`.
pub fn write_synth(out: &SynthOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let d = DataDir::new(dir);
    out.dataset.write_entities(&d.entities())?;
    write_pairs(&d.train(), &out.dataset.pairs)?;
    write_pairs(&d.test(), &out.test)?;
    let meta = serde_json::to_string_pretty(&out.metadata)? + "\n";
    std::fs::write(d.metadata(), meta).map_err(|e| Error::io(d.metadata(), e))
}

/// Mean cosine similarity between entities of categories `a` and `b`
/// (candidates against jobs).
pub fn mean_cross_cosine(dataset: &Dataset, a: usize, b: usize) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for c in dataset.candidates().filter(|c| c.category == a) {
        for j in dataset.jobs().filter(|j| j.category == b) {
            sum += dot(&c.embedding, &j.embedding);
            n += 1;
        }
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}
