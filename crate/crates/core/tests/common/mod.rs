//! A small generated corpus in the shared-task layout, with resource
//! manifests, an English sidecar and an experiment config.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Synthetic {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
}

impl Synthetic {
    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn data(&self) -> PathBuf {
        self.root().join("data")
    }

    pub fn manifest(&self, lang: &str) -> PathBuf {
        self.root().join("res").join(format!("{}.manifest", lang.to_lowercase()))
    }
}

struct Lexicon {
    code: &'static str,
    simple: &'static [&'static str],
    complex: &'static [&'static str],
}

const EN: Lexicon = Lexicon {
    code: "EN",
    simple: &[
        "the", "cat", "sat", "on", "a", "mat", "dog", "ran", "to", "house", "big", "red", "we", "saw", "it", "and",
        "men", "went", "home", "day", "sun", "new", "car", "old", "tree",
    ],
    complex: &[
        "falsifications", "bureaucratic", "photosynthesis", "disestablishment", "electricity", "simplification",
        "encyclopedia", "representation", "extraordinary", "hyphenation", "laser-activated", "drug-related",
        "philippines", "international",
    ],
};

const ES: Lexicon = Lexicon {
    code: "ES",
    simple: &[
        "el", "la", "casa", "sol", "mar", "de", "en", "un", "y", "gato", "pan", "dia", "rio", "luz", "mes",
    ],
    complex: &[
        "contemporaneidad", "desestabilizacion", "otorrinolaringologo", "anticonstitucional", "electrodomesticos",
        "internacionalizacion", "extraordinariamente", "responsabilidades",
    ],
};

const DE: Lexicon = Lexicon {
    code: "DE",
    simple: &[
        "der", "die", "das", "haus", "und", "ein", "hund", "tag", "im", "mit", "rot", "alt", "weg", "see", "gut",
    ],
    complex: &[
        "donaudampfschiffahrt", "rechtsschutzversicherung", "geschwindigkeitsbegrenzung", "bundesverfassungsgericht",
        "wissenschaftlerinnen", "verantwortungsbewusst", "auseinandersetzungen", "unabhaengigkeitserklaerung",
    ],
};

const FR: Lexicon = Lexicon {
    code: "FR",
    simple: &[
        "le", "la", "les", "un", "une", "et", "de", "du", "chat", "mer", "jour", "pain", "bon", "vin", "eau",
    ],
    complex: &[
        "anticonstitutionnellement", "institutionnalisation", "interdisciplinaire", "extraordinairement",
        "desolidarisation", "internationalisation", "responsabilisation", "constitutionnalite",
    ],
};

fn pos_of(word: &str, lex: &Lexicon) -> &'static str {
    if lex.complex.contains(&word) {
        "NOUN"
    } else if word.len() <= 2 {
        "ADP"
    } else {
        "VERB"
    }
}

/// One file of `n` sentences in the 11-column layout; returns the TSV text
/// and sidecar blocks for its sentences.
fn generate_file(rng: &mut ChaCha8Rng, lex: &Lexicon, n: usize, all_mwes_complex: bool, prefix: &str) -> (String, String) {
    let mut tsv = String::new();
    let mut sidecar = String::new();
    let mut id = 0;
    for _ in 0..n {
        let len = rng.gen_range(6..12);
        let words: Vec<&str> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    *lex.complex.choose(rng).unwrap()
                } else {
                    *lex.simple.choose(rng).unwrap()
                }
            })
            .collect();
        let sentence = format!("{}.", words.join(" "));
        let mut offsets = Vec::new();
        let mut at = 0;
        for w in &words {
            offsets.push((at, at + w.chars().count()));
            at += w.chars().count() + 1;
        }
        let mut emit = |start: usize, end: usize, complex: bool, tsv: &mut String| {
            let target: String = sentence.chars().skip(start).take(end - start).collect();
            let label = u8::from(complex);
            let _ = writeln!(
                tsv,
                "{prefix}{id}\t{sentence}\t{start}\t{end}\t{target}\t10\t10\t{}\t{}\t{label}\t{:.2}",
                label * 3,
                label * 2,
                f64::from(label) * 0.25
            );
            id += 1;
        };
        for (i, w) in words.iter().enumerate() {
            if rng.gen_bool(0.6) {
                let (s, e) = offsets[i];
                let noise = rng.gen_bool(0.08);
                emit(s, e, lex.complex.contains(w) != noise, &mut tsv);
            }
        }
        if words.len() >= 2 && rng.gen_bool(0.5) {
            let i = rng.gen_range(0..words.len() - 1);
            let complex = all_mwes_complex || words[i..i + 2].iter().any(|w| lex.complex.contains(w));
            let noise = !all_mwes_complex && rng.gen_bool(0.08);
            emit(offsets[i].0, offsets[i + 1].1, complex != noise, &mut tsv);
        }
        let _ = writeln!(sidecar, "# text = {sentence}");
        for w in &words {
            let pos = pos_of(w, lex);
            let ner = if w.starts_with("phil") { "B-LOC" } else { "O" };
            let np = u8::from(pos == "NOUN");
            let _ = writeln!(sidecar, "{w}\t{w}\t{pos}\t{ner}\t{np}");
        }
        let _ = writeln!(sidecar, ".\t.\tPUNCT\tO\t0\n");
    }
    (tsv, sidecar)
}

fn write(path: &Path, text: &str) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn resources(root: &Path, lex: &Lexicon, hyph: &Path) {
    let res = root.join("res");
    let code = lex.code.to_lowercase();
    let mut corpus = String::new();
    for _ in 0..20 {
        corpus.push_str(&lex.simple.join(" "));
        corpus.push('\n');
    }
    corpus.push_str(lex.complex[0]);
    corpus.push('\n');
    write(&res.join(format!("{code}.corpus")), &corpus);
    write(&res.join(format!("{code}.stop")), &lex.simple[..6].join("\n"));
    write(&res.join(format!("{code}.common")), &lex.simple.join("\n"));
    let mut manifest = format!(
        "language = {}\nunigram_corpus = {code}.corpus\nhyphenation = {}\nstopwords = {code}.stop\nrare_words = {code}.common\n",
        lex.code,
        hyph.display()
    );
    if lex.code == "EN" {
        write(&res.join("roots.txt"), "photo-\n-tion\nbio-\ngraph\n");
        write(&res.join("hypernyms.tsv"), "cat\t6\ndog\t7\nhouse\t5\ncar\t6\n");
        manifest.push_str("affixes = roots.txt\nhypernyms = hypernyms.tsv\n");
    }
    write(&res.join(format!("{code}.manifest")), &manifest);
}

pub fn hyphenation_fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/hyph_en_US.dic")
}

/// `sentences` per train file; dev and test files get a third of that.
pub fn synthetic_corpus(seed: u64, sentences: usize) -> Synthetic {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyph = hyphenation_fixture();
    let small = (sentences / 3).max(4);
    let mut en_sidecar = String::new();

    for genre in ["News", "WikiNews", "Wikipedia"] {
        for (split, n) in [("Train", sentences), ("Dev", small), ("Test", small)] {
            let (tsv, sc) = generate_file(&mut rng, &EN, n, false, &format!("{genre}{split}-"));
            write(&data.join("english").join(format!("{genre}_{split}.tsv")), &tsv);
            en_sidecar.push_str(&sc);
        }
    }
    for (lex, dir_name, stem) in [(&ES, "spanish", "Spanish"), (&DE, "german", "German")] {
        for (split, n) in [("Train", sentences), ("Dev", small), ("Test", small)] {
            let (tsv, _) = generate_file(&mut rng, lex, n, true, &format!("{stem}{split}-"));
            write(&data.join(dir_name).join(format!("{stem}_{split}.tsv")), &tsv);
        }
    }
    let (tsv, _) = generate_file(&mut rng, &FR, small, true, "FrenchTest-");
    write(&data.join("french/French_Test.tsv"), &tsv);

    for lex in [&EN, &ES, &DE, &FR] {
        resources(root, lex, &hyph);
    }
    write(&root.join("ann/en.sidecar"), &en_sidecar);

    let config = root.join("experiment.cfg");
    write(
        &config,
        "data_root = data\nmanifest.EN = res/en.manifest\nmanifest.ES = res/es.manifest\n\
         manifest.DE = res/de.manifest\nmanifest.FR = res/fr.manifest\nsidecar.EN = ann/en.sidecar\n",
    );
    Synthetic { dir, config }
}
