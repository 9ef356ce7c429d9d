//! Prompt, instruction and drag-string synthesis from scene ground truth,
//! plus optional external prompt polishing.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assets::AssetCatalog;
use crate::error::{Error, Result};
use crate::raster::Rgb;
use crate::scene::{bbox_of, spatial_relation, uniform_u32, BBox, Background, Scene, SpatialRelation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorName {
    Red,
    Orange,
    Yellow,
    Green,
    Cyan,
    Blue,
    Purple,
    Pink,
    Brown,
    Black,
    White,
    Gray,
    Beige,
    Magenta,
    Teal,
    Navy,
}

impl ColorName {
    pub const ALL: [ColorName; 16] = [
        ColorName::Red,
        ColorName::Orange,
        ColorName::Yellow,
        ColorName::Green,
        ColorName::Cyan,
        ColorName::Blue,
        ColorName::Purple,
        ColorName::Pink,
        ColorName::Brown,
        ColorName::Black,
        ColorName::White,
        ColorName::Gray,
        ColorName::Beige,
        ColorName::Magenta,
        ColorName::Teal,
        ColorName::Navy,
    ];

    pub fn anchor(self) -> Rgb {
        match self {
            ColorName::Red => [255, 0, 0],
            ColorName::Orange => [255, 165, 0],
            ColorName::Yellow => [255, 255, 0],
            ColorName::Green => [0, 128, 0],
            ColorName::Cyan => [0, 255, 255],
            ColorName::Blue => [0, 0, 255],
            ColorName::Purple => [128, 0, 128],
            ColorName::Pink => [255, 192, 203],
            ColorName::Brown => [139, 69, 19],
            ColorName::Black => [0, 0, 0],
            ColorName::White => [255, 255, 255],
            ColorName::Gray => [128, 128, 128],
            ColorName::Beige => [245, 245, 220],
            ColorName::Magenta => [255, 0, 255],
            ColorName::Teal => [0, 128, 128],
            ColorName::Navy => [0, 0, 128],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColorName::Red => "red",
            ColorName::Orange => "orange",
            ColorName::Yellow => "yellow",
            ColorName::Green => "green",
            ColorName::Cyan => "cyan",
            ColorName::Blue => "blue",
            ColorName::Purple => "purple",
            ColorName::Pink => "pink",
            ColorName::Brown => "brown",
            ColorName::Black => "black",
            ColorName::White => "white",
            ColorName::Gray => "gray",
            ColorName::Beige => "beige",
            ColorName::Magenta => "magenta",
            ColorName::Teal => "teal",
            ColorName::Navy => "navy",
        }
    }
}

impl fmt::Display for ColorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn dist2(a: Rgb, b: Rgb) -> u32 {
    (0..3).map(|i| (a[i] as i32 - b[i] as i32).pow(2) as u32).sum()
}

/// Nearest anchor; ties go to the earlier palette entry.
pub fn name_color(rgb: Rgb) -> ColorName {
    let mut best = ColorName::ALL[0];
    let mut best_d = dist2(rgb, best.anchor());
    for c in &ColorName::ALL[1..] {
        let d = dist2(rgb, c.anchor());
        if d < best_d {
            best = *c;
            best_d = d;
        }
    }
    best
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
    "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

pub fn number_word(n: u32) -> String {
    NUMBER_WORDS.get(n as usize).map_or_else(|| n.to_string(), |w| (*w).to_owned())
}

pub fn plural(noun: &str, n: u32) -> String {
    if n == 1 || noun == "fish" || noun == "sheep" {
        return noun.to_owned();
    }
    if noun.ends_with('s') || noun.ends_with('x') || noun.ends_with("ch") || noun.ends_with("sh") {
        format!("{noun}es")
    } else if noun.ends_with('y') && !noun.ends_with("ay") && !noun.ends_with("ey") && !noun.ends_with("oy") {
        format!("{}ies", &noun[..noun.len() - 1])
    } else {
        format!("{noun}s")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeWord {
    Small,
    Medium,
    Large,
}

impl SizeWord {
    pub fn of(bbox: &BBox, canvas: (u32, u32)) -> SizeWord {
        let f = bbox.area() as f64 / (canvas.0 as f64 * canvas.1 as f64);
        if f < 0.04 {
            SizeWord::Small
        } else if f < 0.15 {
            SizeWord::Medium
        } else {
            SizeWord::Large
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SizeWord::Small => "small",
            SizeWord::Medium => "medium",
            SizeWord::Large => "large",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectFact {
    pub index: usize,
    pub asset_id: String,
    pub tag: String,
    pub color: ColorName,
    pub size: SizeWord,
    pub bbox: BBox,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationFact {
    pub a: usize,
    pub b: usize,
    pub relation: SpatialRelation,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneFacts {
    pub objects: Vec<ObjectFact>,
    pub counts: BTreeMap<String, u32>,
    /// Relations of `a` to `b` for `a < b` among the salient objects.
    pub relations: Vec<RelationFact>,
}

/// A statement realized in a prompt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Claim {
    Count { tag: String, n: u32 },
    Group { tag: String, color: ColorName, n: u32 },
    Relation { a: usize, b: usize, relation: SpatialRelation },
}

impl SceneFacts {
    pub fn entails(&self, claim: &Claim) -> bool {
        match claim {
            Claim::Count { tag, n } => self.counts.get(tag) == Some(n),
            Claim::Group { tag, color, n } => {
                self.objects.iter().filter(|o| &o.tag == tag && o.color == *color).count() as u32 == *n
            }
            Claim::Relation { a, b, relation } => self
                .relations
                .iter()
                .any(|r| (r.a, r.b, r.relation) == (*a, *b, *relation) || (r.a, r.b, r.relation.inverse()) == (*b, *a, *relation)),
        }
    }

    /// Short unambiguous reference to an object, if one exists.
    pub fn descriptor(&self, index: usize) -> Option<String> {
        let o = &self.objects[index];
        let same_tc = self.objects.iter().filter(|p| p.tag == o.tag && p.color == o.color).count();
        if same_tc == 1 {
            return Some(format!("the {} {}", o.color, o.tag));
        }
        let same_all = self
            .objects
            .iter()
            .filter(|p| p.tag == o.tag && p.color == o.color && p.size == o.size)
            .count();
        (same_all == 1).then(|| format!("the {} {} {}", o.size.name(), o.color, o.tag))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub facts: SceneFacts,
    pub claims: Vec<Claim>,
    pub prompt: String,
}

pub const MAX_SALIENT: usize = 4;

pub fn scene_facts(scene: &Scene, catalog: &AssetCatalog) -> Result<SceneFacts> {
    let canvas = scene.canvas();
    let mut facts = SceneFacts::default();
    for (index, p) in scene.placements.iter().enumerate() {
        let asset = catalog.resolve(&p.asset_id)?;
        let bbox = bbox_of(p, &asset, canvas)?;
        let tag = asset.primary_tag().to_owned();
        *facts.counts.entry(tag.clone()).or_default() += 1;
        facts.objects.push(ObjectFact {
            index,
            asset_id: p.asset_id.clone(),
            tag,
            color: name_color(asset.mean_opaque_color().unwrap_or([128, 128, 128])),
            size: SizeWord::of(&bbox, canvas),
            bbox,
        });
    }
    let mut salient: Vec<usize> = (0..facts.objects.len()).collect();
    salient.sort_by_key(|&i| (std::cmp::Reverse(facts.objects[i].bbox.area()), i));
    salient.truncate(MAX_SALIENT);
    salient.sort_unstable();
    for (k, &a) in salient.iter().enumerate() {
        for &b in &salient[k + 1..] {
            facts.relations.push(RelationFact {
                a,
                b,
                relation: spatial_relation(&facts.objects[a].bbox, &facts.objects[b].bbox, canvas),
            });
        }
    }
    Ok(facts)
}

fn mentions_controlled_word(s: &str) -> bool {
    s.split(|c: char| !c.is_ascii_alphabetic()).any(|w| {
        let w = w.to_ascii_lowercase();
        ColorName::ALL.iter().any(|c| c.name() == w) || NUMBER_WORDS.contains(&w.as_str())
    })
}

pub fn background_phrase(background: &Background, catalog: &AssetCatalog) -> String {
    match background {
        Background::Solid(_) => "a plain backdrop".to_owned(),
        Background::Asset(id) => match catalog.resolve(id) {
            Ok(a) if !mentions_controlled_word(a.primary_tag()) => format!("a {} background", a.primary_tag()),
            _ => "a textured background".to_owned(),
        },
    }
}

pub fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [rest @ .., last] => format!("{}, and {last}", rest.join(", ")),
    }
}

fn realize_claim(facts: &SceneFacts, claim: &Claim) -> String {
    match claim {
        Claim::Count { tag, n } => format!("{} {}", number_word(*n), plural(tag, *n)),
        Claim::Group { tag, color, n } => format!("{} {} {}", number_word(*n), color, plural(tag, *n)),
        Claim::Relation { a, b, relation } => {
            let da = facts.descriptor(*a).expect("unambiguous");
            let db = facts.descriptor(*b).expect("unambiguous");
            let mut s = format!("{da} is {} {db}.", relation.phrase());
            s[..1].make_ascii_uppercase();
            s
        }
    }
}

const OPENERS: [&str; 5] = ["A picture of", "An image showing", "A collage of", "A scene with", "A photo of"];

/// Facts about the scene plus a prompt stating a random, non-empty subset
/// of them per category (counts, colors, relations).
pub fn describe_scene(scene: &Scene, catalog: &AssetCatalog, rng: &mut impl Rng) -> Result<SceneDescription> {
    let facts = scene_facts(scene, catalog)?;
    let bg = background_phrase(&scene.background, catalog);
    if facts.objects.is_empty() {
        let templates = ["An empty view of {bg}.", "Just {bg}, with nothing on it.", "A view of {bg} alone."];
        let prompt = templates.choose(rng).expect("non-empty").replace("{bg}", &bg);
        return Ok(SceneDescription {
            facts,
            claims: Vec::new(),
            prompt,
        });
    }
    let mut claims = Vec::new();
    let mut tags: Vec<&String> = facts.counts.keys().collect();
    tags.shuffle(rng);
    let keep = rng.random_range(1..=tags.len());
    tags.truncate(keep);
    tags.sort();
    let colored_first = rng.random_range(0..tags.len());
    for (k, tag) in tags.iter().enumerate() {
        if k == colored_first || rng.random_bool(0.5) {
            let mut by_color: BTreeMap<ColorName, u32> = BTreeMap::new();
            for o in facts.objects.iter().filter(|o| &&o.tag == tag) {
                *by_color.entry(o.color).or_default() += 1;
            }
            for (color, n) in by_color {
                claims.push(Claim::Group {
                    tag: (*tag).clone(),
                    color,
                    n,
                });
            }
        } else {
            claims.push(Claim::Count {
                tag: (*tag).clone(),
                n: facts.counts[*tag],
            });
        }
    }
    let mut rels: Vec<&RelationFact> = facts
        .relations
        .iter()
        .filter(|r| facts.descriptor(r.a).is_some() && facts.descriptor(r.b).is_some())
        .collect();
    if !rels.is_empty() {
        rels.shuffle(rng);
        let keep = rng.random_range(1..=rels.len().min(3));
        for r in &rels[..keep] {
            let claim = if rng.random_bool(0.5) {
                Claim::Relation {
                    a: r.a,
                    b: r.b,
                    relation: r.relation,
                }
            } else {
                Claim::Relation {
                    a: r.b,
                    b: r.a,
                    relation: r.relation.inverse(),
                }
            };
            claims.push(claim);
        }
    }
    let groups: Vec<String> = claims
        .iter()
        .filter(|c| !matches!(c, Claim::Relation { .. }))
        .map(|c| realize_claim(&facts, c))
        .collect();
    let mut prompt = format!("{} {} on {}.", OPENERS.choose(rng).expect("non-empty"), join_list(&groups), bg);
    for c in claims.iter().filter(|c| matches!(c, Claim::Relation { .. })) {
        prompt.push(' ');
        prompt.push_str(&realize_claim(&facts, c));
    }
    Ok(SceneDescription { facts, claims, prompt })
}

pub const DEFAULT_WORDS: &[&str] = &[
    "CAT", "DOG", "HELLO", "WORLD", "SUMMER", "PIXEL", "DREAM", "OCEAN", "RIVER", "MOUNTAIN", "COFFEE", "MUSIC",
    "HAPPY", "SMILE", "PLANET", "ROBOT", "GARDEN", "WINTER", "SPRING", "AUTUMN", "LIGHT", "SHADOW", "MAGIC",
    "ROCKET", "FOREST", "STORM", "CANDY", "SUNNY", "TIGER", "PANDA", "LEMON", "BREAD", "CASTLE", "DRAGON", "GALAXY",
    "HARBOR", "ISLAND", "JUNGLE", "KITE", "LANTERN", "MEADOW", "NIGHT", "ORBIT", "PEACE", "QUEST", "RAIN", "SNOW",
    "TRAIN", "VALLEY", "WAVE", "ZEBRA", "OPEN", "SALE", "WELCOME", "LOVE", "FRESH", "PARTY", "CODE", "BOOK", "STAR",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextParams {
    pub words: Vec<String>,
    pub word_count: (u32, u32),
    /// Empty means every font in the catalog.
    pub fonts: Vec<String>,
    pub colors: Vec<ColorName>,
    pub size: (u32, u32),
    pub thickness: (u32, u32),
    /// Exact text instead of drawing from `words`.
    pub text: Option<String>,
}

impl Default for TextParams {
    fn default() -> Self {
        TextParams {
            words: DEFAULT_WORDS.iter().map(|w| (*w).to_owned()).collect(),
            word_count: (1, 3),
            fonts: Vec::new(),
            colors: ColorName::ALL.to_vec(),
            size: (24, 64),
            thickness: (1, 3),
            text: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSpec {
    pub text: String,
    pub font: String,
    pub color: ColorName,
    pub size: u32,
    pub thickness: u32,
}

impl TextSpec {
    pub fn weight_word(&self) -> &'static str {
        match self.thickness {
            0 | 1 => "thin",
            2 => "regular",
            _ => "bold",
        }
    }
}

pub fn render_text_spec(rng: &mut impl Rng, catalog: &AssetCatalog, params: &TextParams) -> Result<TextSpec> {
    let text = match &params.text {
        Some(t) => t.clone(),
        None => {
            if params.words.is_empty() {
                return Err(Error::EmptyWordList);
            }
            let n = uniform_u32(rng, params.word_count).max(1);
            (0..n)
                .map(|_| params.words.choose(rng).expect("non-empty").clone())
                .collect::<Vec<_>>()
                .join(" ")
        }
    };
    let fonts: Vec<String> = if params.fonts.is_empty() {
        catalog.fonts().map(str::to_owned).collect()
    } else {
        params.fonts.iter().filter(|f| catalog.fonts().any(|c| c == *f)).cloned().collect()
    };
    let font = fonts.choose(rng).ok_or(Error::NoFont)?.clone();
    let color = *params.colors.choose(rng).unwrap_or(&ColorName::Black);
    let size = uniform_u32(rng, params.size);
    let thickness = uniform_u32(rng, params.thickness).max(1);
    Ok(TextSpec {
        text,
        font,
        color,
        size,
        thickness,
    })
}

pub fn text_prompt(spec: &TextSpec, background: &str, rng: &mut impl Rng) -> String {
    let templates = [
        "The text \"{t}\" written in {w} {c} {f} letters on {bg}.",
        "A sign reading \"{t}\" in {w} {c} {f} lettering on {bg}.",
        "The words \"{t}\" in {c} {w} {f} type over {bg}.",
        "{bg_cap} with \"{t}\" spelled out in {w} {c} {f} characters.",
    ];
    let mut bg_cap = background.to_owned();
    bg_cap[..1].make_ascii_uppercase();
    templates
        .choose(rng)
        .expect("non-empty")
        .replace("{t}", &spec.text)
        .replace("{w}", spec.weight_word())
        .replace("{c}", spec.color.name())
        .replace("{f}", &spec.font)
        .replace("{bg_cap}", &bg_cap)
        .replace("{bg}", background)
}

/// A drag in pixel coordinates: the point (x, y) moves by (dx, dy).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelDrag {
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DragPoint {
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DragSpec {
    pub points: Vec<DragPoint>,
}

pub const MAX_DRAG_POINTS: usize = 8;

fn q4(v: f64) -> f64 {
    let r = (v * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn encode_drag(points: &[PixelDrag], canvas: (u32, u32)) -> Result<(DragSpec, String)> {
    if points.is_empty() || points.len() > MAX_DRAG_POINTS {
        return Err(Error::InvalidDrag(format!("{} points, expected 1..={MAX_DRAG_POINTS}", points.len())));
    }
    let (w, h) = (canvas.0 as f64, canvas.1 as f64);
    let on = |x: f64, y: f64| (0.0..=w).contains(&x) && (0.0..=h).contains(&y);
    let mut spec = DragSpec::default();
    for p in points {
        if !on(p.x, p.y) {
            return Err(Error::InvalidDrag(format!("source ({}, {}) off canvas", p.x, p.y)));
        }
        if !on(p.x + p.dx, p.y + p.dy) {
            return Err(Error::InvalidDrag(format!("target ({}, {}) off canvas", p.x + p.dx, p.y + p.dy)));
        }
        spec.points.push(DragPoint {
            x: q4(p.x / w),
            y: q4(p.y / h),
            dx: q4(p.dx / w),
            dy: q4(p.dy / h),
        });
    }
    let text = drag_string(&spec);
    Ok((spec, text))
}

pub fn drag_string(spec: &DragSpec) -> String {
    let body: Vec<String> = spec
        .points
        .iter()
        .map(|p| format!("({:.4}, {:.4}, {:.4}, {:.4})", p.x, p.y, p.dx, p.dy))
        .collect();
    format!("drag: {}", body.join("; "))
}

pub fn decode_drag(s: &str) -> Result<DragSpec> {
    let bad = || Error::DragParse(s.to_owned());
    let body = s.trim().strip_prefix("drag:").ok_or_else(bad)?;
    let mut spec = DragSpec::default();
    for part in body.split(';') {
        let inner = part
            .trim()
            .strip_prefix('(')
            .and_then(|p| p.strip_suffix(')'))
            .ok_or_else(bad)?;
        let nums: Vec<f64> = inner
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let [x, y, dx, dy] = nums[..] else {
            return Err(bad());
        };
        spec.points.push(DragPoint { x, y, dx, dy });
    }
    if spec.points.is_empty() || spec.points.len() > MAX_DRAG_POINTS {
        return Err(bad());
    }
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum EditOp {
    Add { object: String },
    Remove { object: String },
    Replace { old: String, new: String },
}

const ADD_TEMPLATES: [&str; 6] = [
    "Add {o} to the image.",
    "Put {o} in the picture.",
    "Insert {o} into the scene.",
    "Place {o} somewhere in the image.",
    "Include {o} in this picture.",
    "Draw {o} into the scene.",
];
const REMOVE_TEMPLATES: [&str; 6] = [
    "Remove {o} from the image.",
    "Delete {o}.",
    "Erase {o} from the picture.",
    "Take {o} out of the scene.",
    "Get rid of {o}.",
    "Remove {o} and keep everything else.",
];
const REPLACE_TEMPLATES: [&str; 6] = [
    "Replace {a} with {b}.",
    "Swap {a} for {b}.",
    "Change {a} into {b}.",
    "Turn {a} into {b}.",
    "Exchange {a} for {b}.",
    "Where {a} is, put {b} instead.",
];

pub fn edit_instruction(op: &EditOp, rng: &mut impl Rng) -> String {
    match op {
        EditOp::Add { object } => ADD_TEMPLATES.choose(rng).expect("non-empty").replace("{o}", object),
        EditOp::Remove { object } => REMOVE_TEMPLATES.choose(rng).expect("non-empty").replace("{o}", object),
        EditOp::Replace { old, new } => REPLACE_TEMPLATES
            .choose(rng)
            .expect("non-empty")
            .replace("{a}", old)
            .replace("{b}", new),
    }
}

/// A text rewriting service.
pub trait Polisher: Send + Sync {
    fn polish(&self, raw: &str) -> std::result::Result<String, String>;
}

pub struct IdentityPolisher;

impl Polisher for IdentityPolisher {
    fn polish(&self, raw: &str) -> std::result::Result<String, String> {
        Ok(raw.to_owned())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolisherConfig {
    pub url: Option<String>,
    /// Environment variable holding the bearer credential.
    pub token_env: String,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for PolisherConfig {
    fn default() -> Self {
        PolisherConfig {
            url: None,
            token_env: "COLLAGE_POLISHER_TOKEN".to_owned(),
            max_in_flight: 4,
            timeout_secs: 10,
        }
    }
}

struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.count.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

/// POSTs `{"raw_prompt": ...}` and reads `{"polished_prompt": ...}`.
pub struct HttpPolisher {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
    limit: InFlight,
}

impl HttpPolisher {
    pub fn new(url: impl Into<String>, token: Option<String>, timeout: Duration, max_in_flight: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        HttpPolisher {
            url: url.into(),
            token,
            agent,
            limit: InFlight {
                count: Mutex::new(0),
                freed: Condvar::new(),
                cap: max_in_flight.max(1),
            },
        }
    }

    pub fn from_config(cfg: &PolisherConfig) -> Option<Self> {
        let url = cfg.url.clone()?;
        let token = std::env::var(&cfg.token_env).ok().filter(|t| !t.is_empty());
        Some(HttpPolisher::new(url, token, Duration::from_secs(cfg.timeout_secs), cfg.max_in_flight))
    }
}

#[derive(Serialize)]
struct PolishRequest<'a> {
    raw_prompt: &'a str,
}

#[derive(Deserialize)]
struct PolishResponse {
    polished_prompt: String,
}

impl Polisher for HttpPolisher {
    fn polish(&self, raw: &str) -> std::result::Result<String, String> {
        let _slot = self.limit.acquire();
        let mut req = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(PolishRequest { raw_prompt: raw }).map_err(|e| e.to_string())?;
        let body: PolishResponse = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        Ok(body.polished_prompt)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polished {
    pub text: String,
    pub warning: Option<String>,
}

/// Polisher output, or the raw prompt with a warning if the polisher fails.
pub fn polish(prompt: &str, polisher: &dyn Polisher) -> Polished {
    match polisher.polish(prompt) {
        Ok(text) => Polished { text, warning: None },
        Err(e) => {
            log::warn!("prompt polisher failed, keeping raw prompt: {e}");
            Polished {
                text: prompt.to_owned(),
                warning: Some(e),
            }
        }
    }
}
