//! Deterministic synthetic treebank over the tag set of the built-in
//! curricula.
//!
//! The template grammar has flat expansions for the early Inward stage
//! (`S → PRP VB`, `FRAG → PRP$ NN`, `INTJ → UH UH`) alongside the usual
//! phrase structure, so every stage of every built-in plan can parse some
//! of the sentences. The first expansion of each category terminates, and
//! is forced once the tree gets deep.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stagegram_core::treebank::Tree;

type Expansions = &'static [(f64, &'static [&'static str])];

const PHRASES: &[(&str, Expansions)] = &[
    (
        "ROOT",
        &[
            (5.0, &["S"]),
            (2.0, &["FRAG"]),
            (1.0, &["INTJ"]),
            (1.0, &["SQ"]),
            (1.0, &["SBARQ"]),
            (0.3, &["SINV"]),
        ],
    ),
    (
        "S",
        &[
            (2.0, &["PRP", "VB"]),
            (6.0, &["NP", "VP"]),
            (0.6, &["S", "CC", "S"]),
            (0.8, &["INTJ", "NP", "VP"]),
        ],
    ),
    (
        "FRAG",
        &[
            (2.0, &["PRP$", "NN"]),
            (2.0, &["NP"]),
            (1.0, &["INTJ", "NP"]),
            (1.0, &["NP", "PP"]),
            (0.5, &["ADJP"]),
        ],
    ),
    (
        "NP",
        &[
            (3.0, &["PRP"]),
            (1.0, &["NN"]),
            (2.0, &["NNP"]),
            (2.0, &["PRP$", "NN"]),
            (3.0, &["DT", "NN"]),
            (1.0, &["DT", "JJ", "NN"]),
            (1.0, &["NNS"]),
            (1.0, &["CD", "NNS"]),
            (0.8, &["NP", "PP"]),
            (0.4, &["NP", "SBAR"]),
            (0.3, &["PDT", "DT", "NN"]),
            (0.3, &["NNP", "POS", "NN"]),
            (0.3, &["NNPS"]),
        ],
    ),
    (
        "VP",
        &[
            (2.0, &["VB"]),
            (4.0, &["VB", "NP"]),
            (1.0, &["VB", "PP"]),
            (1.0, &["VB", "ADVP"]),
            (1.0, &["VBG", "NP"]),
            (2.0, &["VBZ", "NP"]),
            (2.0, &["VBD", "NP"]),
            (1.0, &["VBP", "ADJP"]),
            (1.0, &["MD", "VP"]),
            (0.5, &["VBP", "SBAR"]),
            (0.5, &["VB", "RP", "NP"]),
            (0.5, &["VBN", "PP"]),
            (0.3, &["AUX", "NOT", "VP"]),
            (0.5, &["COP", "ADJP"]),
        ],
    ),
    ("PP", &[(1.0, &["IN", "NP"])]),
    (
        "ADJP",
        &[(3.0, &["JJ"]), (1.0, &["RB", "JJ"]), (0.5, &["JJR"]), (0.5, &["JJS"])],
    ),
    ("ADVP", &[(3.0, &["RB"]), (0.5, &["RBR"]), (0.5, &["RBS"])]),
    (
        "SBAR",
        &[(1.0, &["IN", "S"]), (1.0, &["COMP", "S"]), (1.0, &["WHNP", "S"])],
    ),
    (
        "SQ",
        &[
            (1.0, &["MD", "NP", "VP"]),
            (1.0, &["AUX", "NP", "VP"]),
            (1.0, &["VBZ", "NP", "ADJP"]),
        ],
    ),
    (
        "SBARQ",
        &[(2.0, &["WHNP", "SQ"]), (1.0, &["WHADVP", "SQ"]), (0.5, &["WHADJP", "SQ"])],
    ),
    ("SINV", &[(1.0, &["ADVP", "VBZ", "NP"])]),
    (
        "WHNP",
        &[(2.0, &["WP"]), (1.0, &["WDT", "NN"]), (0.5, &["WP$", "NN"])],
    ),
    ("WHADVP", &[(1.0, &["WRB"])]),
    ("WHADJP", &[(1.0, &["WRB", "JJ"])]),
    (
        "INTJ",
        &[(3.0, &["UH"]), (1.0, &["UH", "UH"]), (0.3, &["INTJ", "INTJ"])],
    ),
];

const LEXICON: &[(&str, &[&str])] = &[
    ("NN", &["ball", "dog", "cat", "cup", "book", "juice", "car"]),
    ("NNS", &["balls", "dogs", "cookies", "blocks"]),
    ("NNP", &["mommy", "daddy", "fraser", "adam"]),
    ("NNPS", &["smiths", "joneses"]),
    ("PRP", &["you", "it", "i", "we", "he"]),
    ("PRP$", &["my", "your", "his"]),
    ("VB", &["see", "go", "want", "eat", "play", "get"]),
    ("VBD", &["saw", "went", "wanted", "ate"]),
    ("VBG", &["going", "eating", "playing"]),
    ("VBN", &["gone", "eaten"]),
    ("VBP", &["are", "like", "think"]),
    ("VBZ", &["is", "wants", "likes", "goes"]),
    ("MD", &["can", "will", "should"]),
    ("AUX", &["do", "does", "did"]),
    ("COP", &["be", "am"]),
    ("NOT", &["not", "n't"]),
    ("DT", &["the", "a", "that", "this"]),
    ("PDT", &["all", "both"]),
    ("POS", &["'s"]),
    ("CD", &["two", "three"]),
    ("JJ", &["big", "red", "little", "hot"]),
    ("JJR", &["bigger"]),
    ("JJS", &["biggest"]),
    ("RB", &["here", "now", "very", "too"]),
    ("RBR", &["more"]),
    ("RBS", &["most"]),
    ("IN", &["in", "on", "with", "if"]),
    ("RP", &["up", "down"]),
    ("CC", &["and", "but"]),
    ("COMP", &["that"]),
    ("WP", &["what", "who"]),
    ("WP$", &["whose"]),
    ("WDT", &["which"]),
    ("WRB", &["where", "how"]),
    ("UH", &["oh", "yeah", "no", "hi"]),
];

const MAX_DEPTH: usize = 5;
pub const MIN_LEN: usize = 2;
pub const MAX_LEN: usize = 10;

fn pick<'a, T>(rng: &mut ChaCha8Rng, options: &'a [(f64, T)]) -> &'a T {
    let total: f64 = options.iter().map(|o| o.0).sum();
    let mut x = rng.gen::<f64>() * total;
    for (w, o) in options {
        if x < *w {
            return o;
        }
        x -= w;
    }
    &options[options.len() - 1].1
}

fn expand(label: &str, depth: usize, rng: &mut ChaCha8Rng) -> Tree {
    if let Some((_, words)) = LEXICON.iter().find(|(tag, _)| *tag == label) {
        let w = words[rng.gen_range(0..words.len())];
        return Tree::preterminal(label, w);
    }
    let (_, options) = PHRASES
        .iter()
        .find(|(nt, _)| *nt == label)
        .unwrap_or_else(|| panic!("no template for {label}"));
    let rhs = if depth >= MAX_DEPTH {
        options[0].1
    } else {
        *pick(rng, options)
    };
    Tree::node(label, rhs.iter().map(|c| expand(c, depth + 1, rng)).collect())
}

/// `count` trees rooted in `ROOT` with yields of 2 to 10 tokens.
pub fn synthetic_treebank(count: usize, seed: u64) -> Vec<Tree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let t = expand("ROOT", 0, &mut rng);
        if (MIN_LEN..=MAX_LEN).contains(&t.yield_len()) {
            out.push(t);
        }
    }
    out
}

/// One tree per line.
pub fn treebank_text(trees: &[Tree]) -> String {
    let mut s = String::new();
    for t in trees {
        s.push_str(&t.to_string());
        s.push('\n');
    }
    s
}
