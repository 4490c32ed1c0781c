//! Simulated filler-word diarization errors.
//!
//! For every dialogue a target number of erroneous merges is drawn from the
//! renormalized dialogue shares. Each merge draws a filler from that row's
//! shares, picks uniformly among utterances whose boundary carries that
//! filler, and joins the utterance with its preceding neighbor (leading
//! filler) or following neighbor (trailing filler). The neighbor's speaker
//! survives. A joined utterance never spans more than [`MAX_CHAIN`]
//! original utterances.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::ErrorDistribution;
use super::labels::{label_with, BoundaryLabels, LabelScheme};
use super::lexicon::{filler_boundary, BoundaryPosition, FillerLexicon};
use crate::par::{self, Execution};
use crate::transcript::{Corpus, Dialogue, TranscriptError, Utterance};

/// Longest run of original utterances that may end up in one utterance.
pub const MAX_CHAIN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueInjection {
    pub id: String,
    /// Merged-count row drawn for this dialogue.
    pub target_merges: usize,
    pub merges: usize,
    pub fillers: Vec<String>,
    /// Original-utterance count of every corrupted utterance that absorbed a merge.
    pub chain_lengths: Vec<usize>,
    /// Merges where the drawn filler had no site and another filler was used.
    pub fallbacks: usize,
    /// Set when the dialogue ran out of eligible sites before reaching its target.
    pub skipped: bool,
    /// Original utterance indices making up each corrupted utterance.
    pub segments: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionReport {
    pub dialogues: Vec<DialogueInjection>,
}

impl InjectionReport {
    /// Percentage of dialogues by number of merges performed.
    pub fn merged_count_shares(&self) -> BTreeMap<usize, f64> {
        let mut counts = BTreeMap::new();
        for d in &self.dialogues {
            *counts.entry(d.merges).or_insert(0usize) += 1;
        }
        let n = self.dialogues.len().max(1) as f64;
        counts.into_iter().map(|(k, c)| (k, 100.0 * c as f64 / n)).collect()
    }

    /// Percentage of each filler among the merges of dialogues drawn for each row.
    pub fn filler_shares_by_row(&self) -> BTreeMap<usize, IndexMap<String, f64>> {
        let mut counts: BTreeMap<usize, IndexMap<String, usize>> = BTreeMap::new();
        for d in &self.dialogues {
            let row = counts.entry(d.target_merges).or_default();
            for f in &d.fillers {
                *row.entry(f.clone()).or_insert(0) += 1;
            }
        }
        counts
            .into_iter()
            .map(|(k, row)| {
                let total = row.values().sum::<usize>().max(1) as f64;
                (k, row.into_iter().map(|(f, c)| (f, 100.0 * c as f64 / total)).collect())
            })
            .collect()
    }

    pub fn max_chain(&self) -> usize {
        self.dialogues.iter().flat_map(|d| d.chain_lengths.iter().copied()).max().unwrap_or(1)
    }

    pub fn skipped(&self) -> usize {
        self.dialogues.iter().filter(|d| d.skipped).count()
    }

    pub fn fallbacks(&self) -> usize {
        self.dialogues.iter().map(|d| d.fallbacks).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Injection {
    pub corrupted: Corpus,
    pub gold: Vec<BoundaryLabels>,
    pub report: InjectionReport,
}

struct Site {
    group: usize,
    position: BoundaryPosition,
    filler: String,
}

fn group_tokens(originals: &[Utterance], group: &[usize]) -> Vec<crate::transcript::Token> {
    group.iter().flat_map(|&i| originals[i].tokens().iter().cloned()).collect()
}

fn eligible_sites(originals: &[Utterance], groups: &[Vec<usize>], lexicon: &FillerLexicon) -> Vec<Site> {
    let mut sites = Vec::new();
    for (g, members) in groups.iter().enumerate() {
        let Some(b) = filler_boundary(&group_tokens(originals, members), lexicon) else {
            continue;
        };
        let neighbor = match b.position {
            BoundaryPosition::Begins if g > 0 => g - 1,
            BoundaryPosition::Ends if g + 1 < groups.len() => g + 1,
            _ => continue,
        };
        if members.len() + groups[neighbor].len() <= MAX_CHAIN {
            sites.push(Site { group: g, position: b.position, filler: b.filler });
        }
    }
    sites
}

fn choose_site<R: Rng>(
    rng: &mut R,
    sites: &[Site],
    fillers: &IndexMap<String, f64>,
) -> (usize, bool) {
    let weights: Vec<f64> = fillers.values().copied().collect();
    let drawn = WeightedIndex::new(&weights).ok().map(|w| fillers.get_index(w.sample(rng)).unwrap().0.clone());
    if let Some(filler) = drawn {
        let matching: Vec<usize> = (0..sites.len()).filter(|&i| sites[i].filler == filler).collect();
        if !matching.is_empty() {
            return (matching[rng.gen_range(0..matching.len())], false);
        }
    }
    // Fallback: redraw among fillers that do have sites, by the same shares.
    let mut available: Vec<&str> = Vec::new();
    for s in sites {
        if !available.contains(&s.filler.as_str()) {
            available.push(&s.filler);
        }
    }
    let weights: Vec<f64> = available.iter().map(|f| fillers.get(*f).copied().unwrap_or(0.0)).collect();
    let filler = match WeightedIndex::new(&weights) {
        Ok(w) => available[w.sample(rng)],
        Err(_) => available[rng.gen_range(0..available.len())],
    };
    let matching: Vec<usize> = (0..sites.len()).filter(|&i| sites[i].filler == filler).collect();
    (matching[rng.gen_range(0..matching.len())], true)
}

/// Corrupts one dialogue. `seed` should already be specific to the dialogue.
pub fn inject_dialogue(
    dialogue: &Dialogue,
    dist: &ErrorDistribution,
    lexicon: &FillerLexicon,
    scheme: LabelScheme,
    seed: u64,
) -> Result<(Dialogue, BoundaryLabels, DialogueInjection), TranscriptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shares = dist.renormalized_shares();
    let row = &dist.rows()[WeightedIndex::new(&shares).expect("validated shares").sample(&mut rng)];

    let originals = dialogue.utterances();
    let mut groups: Vec<Vec<usize>> = (0..originals.len()).map(|i| vec![i]).collect();
    // Index of the original utterance whose speaker and flag each group keeps.
    let mut hosts: Vec<usize> = (0..originals.len()).collect();
    let mut fillers = Vec::new();
    let mut fallbacks = 0;
    let mut skipped = false;

    for _ in 0..row.merged {
        let sites = eligible_sites(originals, &groups, lexicon);
        if sites.is_empty() {
            skipped = true;
            break;
        }
        let (pick, fell_back) = choose_site(&mut rng, &sites, &row.filler_shares);
        fallbacks += usize::from(fell_back);
        let site = &sites[pick];
        fillers.push(site.filler.clone());
        let (left, right, host) = match site.position {
            BoundaryPosition::Begins => (site.group - 1, site.group, hosts[site.group - 1]),
            BoundaryPosition::Ends => (site.group, site.group + 1, hosts[site.group + 1]),
        };
        let absorbed = groups.remove(right);
        hosts.remove(right);
        groups[left].extend(absorbed);
        hosts[left] = host;
    }

    let reference = label_with(dialogue, scheme);
    let mut utterances = Vec::with_capacity(groups.len());
    let mut labels = Vec::with_capacity(groups.len());
    for (members, &host) in groups.iter().zip(&hosts) {
        let h = &originals[host];
        utterances.push(Utterance::new(h.speaker(), group_tokens(originals, members), h.flag(), h.is_topical())?);
        labels.push(members.iter().flat_map(|&i| reference.utterances[i].iter().copied()).collect());
    }
    let report = DialogueInjection {
        id: dialogue.id().to_string(),
        target_merges: row.merged,
        merges: fillers.len(),
        fillers,
        chain_lengths: groups.iter().filter(|g| g.len() > 1).map(Vec::len).collect(),
        fallbacks,
        skipped,
        segments: groups,
    };
    Ok((dialogue.with_utterances(utterances)?, BoundaryLabels { utterances: labels }, report))
}

pub fn inject_errors(
    corpus: &Corpus,
    dist: &ErrorDistribution,
    lexicon: &FillerLexicon,
    seed: u64,
) -> Result<Injection, TranscriptError> {
    inject_errors_with(corpus, dist, lexicon, LabelScheme::LastTwo, seed, Execution::default())
}

/// [`inject_errors`] with an explicit labeling scheme and execution mode.
/// Each dialogue uses a sub-seed derived from `(seed, index)`, so output is
/// identical across execution modes.
pub fn inject_errors_with(
    corpus: &Corpus,
    dist: &ErrorDistribution,
    lexicon: &FillerLexicon,
    scheme: LabelScheme,
    seed: u64,
    exec: Execution,
) -> Result<Injection, TranscriptError> {
    let results = par::map_indexed(exec, corpus.dialogues(), |i, d| {
        inject_dialogue(d, dist, lexicon, scheme, par::sub_seed(seed, i as u64))
    });
    let mut dialogues = Vec::with_capacity(results.len());
    let mut gold = Vec::with_capacity(results.len());
    let mut report = Vec::with_capacity(results.len());
    for r in results {
        let (d, l, rep) = r?;
        dialogues.push(d);
        gold.push(l);
        report.push(rep);
    }
    Ok(Injection {
        corrupted: Corpus::new(dialogues, corpus.split())?,
        gold,
        report: InjectionReport { dialogues: report },
    })
}
