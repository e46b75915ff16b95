//! Fixtures shared by the integration and acceptance tests: the warehouse
//! scenes printed with the worked examples, and a planted metrics fixture
//! with a brute-force scorer that never touches the library's normalizer.

#![allow(dead_code)]

use spatial_vqa::dataset::{Prediction, QARecord, QuestionCategory, Region, Scene};
use spatial_vqa::geometry::BoundingBox;
use spatial_vqa::metrics::EvalReport;
use spatial_vqa::rng::SplitMix64;

pub fn scene(id: &str, regions: &[(&str, [f64; 4])]) -> Scene {
    Scene {
        scene_id: id.into(),
        rgb_path: None,
        depth_path: None,
        regions: regions
            .iter()
            .enumerate()
            .map(|(index, (category, b))| Region {
                index,
                category: (*category).into(),
                bbox: BoundingBox::try_from(*b).unwrap(),
            })
            .collect(),
    }
}

pub fn record(id: &str, scene_id: &str, category: QuestionCategory, question: &str, order: Vec<usize>) -> QARecord {
    QARecord {
        record_id: id.into(),
        scene_id: scene_id.into(),
        category,
        question: question.into(),
        region_order: order,
        answer_freeform: String::new(),
        answer_normalized: None,
        enriched: false,
    }
}

pub const PALLET_PAIR_QUESTION: &str = "Is the pallet <mask> to the left or right of the pallet <mask>?";
pub const PALLET_PAIR_ENRICHED: &str = "Given all bounding box sizes are in the form x1y1x2y2, Is the pallet Region 0 within bounding box (139.2, 160.0, 160.6, 205.8) to the left or right of the pallet Region 1 within bounding box (222.8, 296.5, 253.4, 353.7)?";
pub const PALLET_PAIR_OUTPUT: &str =
    "The pallet [Region 0] is situated on the right of the pallet [Region 1]. In short the normalized answer is right.";

pub fn pallet_pair_scene() -> Scene {
    scene(
        "pair",
        &[
            ("pallet", [139.2, 160.0, 160.6, 205.8]),
            ("pallet", [222.8, 296.5, 253.4, 353.7]),
        ],
    )
}

pub const WAREHOUSE_COUNT_OUTPUT: &str = "The buffer region [Region 1] is the closest to the shelf [Region 14]. There are pallets [Region 3] [Region 8] [Region 10] in the buffer region [Region 1]. Hence, in buffer area [Region 1], there are exactly three pallets. In short the normalized answer is \u{201C}3\u{201D}.";

pub fn warehouse_scene() -> Scene {
    scene(
        "warehouse",
        &[
            ("buffer", [451.5, 59.8, 607.6, 158.0]),
            ("buffer", [137.9, 60.6, 262.4, 146.4]),
            ("buffer", [312.5, 58.2, 411.7, 154.8]),
            ("pallet", [169.6, 89.0, 230.0, 114.2]),
            ("pallet", [332.8, 67.4, 374.75, 91.6]),
            ("pallet", [507.37, 119.0, 579.9, 150.2]),
            ("pallet", [231.1, 75.8, 285.1, 98.0]),
            ("pallet", [146.8, 112.0, 218.6, 137.0]),
            ("pallet", [408.1, 38.4, 451.5, 59.4]),
            ("pallet", [477.8, 69.0, 533.3, 96.2]),
            ("pallet", [343.4, 54.0, 381.5, 72.8]),
            ("pallet", [183.82, 72.8, 235.0, 93.8]),
            ("pallet", [473.2, 56.2, 520.5, 75.4]),
            ("shelf", [0.0, 7.4, 153.6, 114.6]),
            ("shelf", [575.6, 0.0, 682.3, 58.4]),
        ],
    )
}

pub const VIEWING_ANGLE_QUESTION: &str =
    "Can you determine if the pallet <mask> is to the right of the pallet <mask> based on the current viewing angle?";
pub const VIEWING_ANGLE_ANSWER: &str =
    "Looking from this angle, the pallet [Region 0] is to the left of the pallet [Region 1].";

pub fn viewing_angle_scene() -> Scene {
    scene(
        "angle",
        &[
            ("pallet", [314.31111111111113, 158.8, 368.0, 199.4]),
            ("pallet", [402.1333333333333, 91.4, 434.84444444444443, 111.6]),
        ],
    )
}

/// Ground truth of one planted case, as the scorer should understand it.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Number { value: f64, meters: bool },
    Label(String),
}

/// What the planted prediction says.
#[derive(Debug, Clone, PartialEq)]
pub enum Planted {
    Missing,
    Garbage,
    Number { value: f64, pixels: bool },
    Label(String),
}

#[derive(Debug, Clone)]
pub struct Case {
    pub category: QuestionCategory,
    pub truth: Truth,
    pub planted: Planted,
}

fn fmt(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

const COUNT_WORDS: [&str; 13] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
];

/// `n` records with planted predictions covering hits, misses, the 90%
/// boundary, zero ground truths, number words, unit clashes, unparseable
/// outputs and missing predictions.
pub fn metrics_fixture(seed: u64, n: usize) -> (Vec<QARecord>, Vec<Prediction>, Vec<Case>) {
    let mut rng = SplitMix64::new(seed);
    let mut records = Vec::with_capacity(n);
    let mut predictions = Vec::new();
    let mut cases = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("m{i:04}");
        let category = QuestionCategory::ALL[rng.below(4) as usize];
        let roll = rng.below(10);
        let (truth, label, planted) = match category {
            QuestionCategory::Distance => {
                let g = (rng.range(1.0, 500.0) * 100.0).round() / 100.0;
                let meters = rng.below(3) == 0;
                let planted = match roll {
                    0 => Planted::Missing,
                    1 => Planted::Garbage,
                    2 => Planted::Number {
                        value: 0.9 * g,
                        pixels: false,
                    },
                    3 if meters => Planted::Number { value: g, pixels: true },
                    4 | 5 => Planted::Number {
                        value: g * rng.range(1.2, 2.0),
                        pixels: false,
                    },
                    _ => Planted::Number {
                        value: g * rng.range(0.92, 1.08),
                        pixels: false,
                    },
                };
                let label = if meters { format!("{} meters", fmt(g)) } else { fmt(g) };
                (Truth::Number { value: g, meters }, label, planted)
            }
            QuestionCategory::Count => {
                let g = rng.below(13) as f64;
                let planted = match roll {
                    0 => Planted::Missing,
                    1 => Planted::Garbage,
                    2 | 3 => Planted::Number {
                        value: g + 1.0 + rng.below(3) as f64,
                        pixels: false,
                    },
                    4 => Planted::Label(COUNT_WORDS[g as usize].to_string()),
                    _ => Planted::Number {
                        value: g,
                        pixels: false,
                    },
                };
                (
                    Truth::Number {
                        value: g,
                        meters: false,
                    },
                    format!("{g}"),
                    planted,
                )
            }
            QuestionCategory::LeftRight => {
                let (g, other) = if rng.below(2) == 0 {
                    ("left", "right")
                } else {
                    ("right", "left")
                };
                let planted = match roll {
                    0 => Planted::Missing,
                    1 => Planted::Garbage,
                    2 | 3 => Planted::Label(other.into()),
                    _ => Planted::Label(g.into()),
                };
                (Truth::Label(g.into()), g.to_string(), planted)
            }
            QuestionCategory::Mcq => {
                let k = rng.below(15);
                let g = format!("region {k}");
                let planted = match roll {
                    0 => Planted::Missing,
                    1 => Planted::Garbage,
                    2 | 3 => Planted::Label(format!("region {}", (k + 1) % 15)),
                    _ => Planted::Label(format!("Region {k}")),
                };
                (Truth::Label(g.clone()), g, planted)
            }
        };
        let mut r = record(&id, "s", category, "q", vec![]);
        r.answer_normalized = Some(label);
        records.push(r);
        let raw = match &planted {
            Planted::Missing => None,
            Planted::Garbage => Some("The scene is cluttered and I cannot tell.".to_string()),
            Planted::Number { value, pixels } => {
                let unit = if *pixels { " pixels" } else { "" };
                Some(format!("In short, the normalized answer is {}{unit}.", fmt(*value)))
            }
            Planted::Label(l) => Some(format!("In short, the normalized answer is {l}.")),
        };
        if let Some(raw) = raw {
            predictions.push(Prediction::new(id, raw));
        }
        cases.push(Case {
            category,
            truth,
            planted,
        });
    }
    (records, predictions, cases)
}

/// Independently computed report fields, per category in `ALL` order.
#[derive(Debug, Clone, Default)]
pub struct Expected {
    pub n: [usize; 4],
    pub successes: [usize; 4],
    pub rmse: [Option<f64>; 4],
    pub rmse_pairs: [usize; 4],
    pub rmse_excluded: [usize; 4],
    pub mre: [Option<f64>; 4],
    pub mre_pairs: [usize; 4],
    pub mre_undefined: [usize; 4],
    pub n_missing: usize,
    pub n_flagged: usize,
}

fn slot(c: QuestionCategory) -> usize {
    QuestionCategory::ALL.iter().position(|x| *x == c).unwrap()
}

fn planted_number(p: &Planted) -> Option<(f64, bool)> {
    match p {
        Planted::Number { value, pixels } => Some((*value, *pixels)),
        Planted::Label(w) => COUNT_WORDS.iter().position(|x| x == w).map(|v| (v as f64, false)),
        _ => None,
    }
}

pub fn brute_force(cases: &[Case]) -> Expected {
    let mut e = Expected::default();
    let mut sq = [0.0f64; 4];
    let mut rel = [0.0f64; 4];
    for c in cases {
        let s = slot(c.category);
        e.n[s] += 1;
        match c.planted {
            Planted::Missing => e.n_missing += 1,
            Planted::Garbage => e.n_flagged += 1,
            _ => {}
        }
        let hit = match (&c.truth, &c.planted) {
            (Truth::Number { value: g, .. }, p) => match planted_number(p) {
                Some((v, false)) => {
                    e.rmse_pairs[s] += 1;
                    sq[s] += (v - g).powi(2);
                    if *g == 0.0 {
                        e.mre_undefined[s] += 1;
                        v.abs() <= 1e-9
                    } else {
                        e.mre_pairs[s] += 1;
                        rel[s] += 100.0 * (v - g).abs() / g.abs();
                        (v - g).abs() <= 0.1 * g.abs() * (1.0 + 1e-12)
                    }
                }
                _ => {
                    e.rmse_excluded[s] += 1;
                    false
                }
            },
            (Truth::Label(g), Planted::Label(p)) => p.to_lowercase() == *g,
            (Truth::Label(_), _) => false,
        };
        e.successes[s] += usize::from(hit);
    }
    for s in 0..4 {
        if e.rmse_pairs[s] > 0 {
            e.rmse[s] = Some((sq[s] / e.rmse_pairs[s] as f64).sqrt());
        }
        if e.mre_pairs[s] > 0 {
            e.mre[s] = Some(rel[s] / e.mre_pairs[s] as f64);
        }
    }
    e
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

fn pct(hits: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| 100.0 * hits as f64 / n as f64)
}

/// Every report field against the brute-force values; the first mismatch
/// is returned as an error message.
pub fn compare(report: &EvalReport, e: &Expected, tol: f64) -> Result<(), String> {
    use QuestionCategory::*;
    for c in QuestionCategory::ALL {
        let s = slot(c);
        let st = report.categories.get(&c).ok_or(format!("{c} missing from report"))?;
        let checks = [
            ("n", st.n == e.n[s]),
            ("successes", st.successes == e.successes[s]),
            ("success_rate", close(st.success_rate, pct(e.successes[s], e.n[s]), tol)),
            ("rmse", close(st.rmse, e.rmse[s], tol)),
            ("rmse_pairs", st.rmse_pairs == e.rmse_pairs[s]),
            ("rmse_excluded", st.rmse_excluded == e.rmse_excluded[s]),
            ("mean_relative_error", close(st.mean_relative_error, e.mre[s], tol)),
            ("relative_error_pairs", st.relative_error_pairs == e.mre_pairs[s]),
            (
                "relative_error_undefined",
                st.relative_error_undefined == e.mre_undefined[s],
            ),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(format!("{c}.{name}: report {st:?}"));
        }
    }
    let union = |cats: &[QuestionCategory]| {
        let hits = cats.iter().map(|c| e.successes[slot(*c)]).sum();
        let n = cats.iter().map(|c| e.n[slot(*c)]).sum();
        pct(hits, n)
    };
    let top = [
        ("count_rmse", close(report.count_rmse, e.rmse[slot(Count)], tol)),
        (
            "distance_rmse",
            close(report.distance_rmse, e.rmse[slot(Distance)], tol),
        ),
        ("quant", close(report.quant, union(&[Count, Distance]), tol)),
        ("qual", close(report.qual, union(&[LeftRight, Mcq]), tol)),
        ("s1", close(report.s1, union(&QuestionCategory::ALL), tol)),
        ("n_total", report.n_total == e.n.iter().sum::<usize>()),
        ("n_missing", report.n_missing == e.n_missing),
        ("n_flagged", report.n_flagged == e.n_flagged),
    ];
    match top.iter().find(|(_, ok)| !ok) {
        Some((name, _)) => Err(format!("{name} differs")),
        None => Ok(()),
    }
}
