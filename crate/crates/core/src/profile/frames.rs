use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svg::{self, Svg};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub language: String,
    pub lu: String,
    pub frame: String,
    pub instance_id: String,
}

/// Tab-separated `language, lu, frame, instance_id`; a header row with those
/// names is skipped, as are blank lines.
pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if i == 0 && fields.first() == Some(&"language") {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::Parse {
                index: i + 1,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        out.push(Annotation {
            language: fields[0].to_owned(),
            lu: fields[1].to_owned(),
            frame: fields[2].to_owned(),
            instance_id: fields[3].to_owned(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCell {
    pub frame: String,
    pub lu: String,
    pub count: usize,
    /// Share of the language's annotations.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageTally {
    pub language: String,
    pub total: usize,
    /// Ordered by frame, then LU.
    pub cells: Vec<FrameCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameTally {
    pub languages: Vec<LanguageTally>,
}

pub fn frame_tally(annotations: &[Annotation]) -> Result<FrameTally> {
    if annotations.is_empty() {
        return Err(Error::invalid("no frame annotations"));
    }
    let mut counts: BTreeMap<&str, BTreeMap<(&str, &str), usize>> = BTreeMap::new();
    for a in annotations {
        *counts
            .entry(a.language.as_str())
            .or_default()
            .entry((a.frame.as_str(), a.lu.as_str()))
            .or_default() += 1;
    }
    let languages = counts
        .into_iter()
        .map(|(language, cells)| {
            let total: usize = cells.values().sum();
            LanguageTally {
                language: language.to_owned(),
                total,
                cells: cells
                    .into_iter()
                    .map(|((frame, lu), count)| FrameCell {
                        frame: frame.to_owned(),
                        lu: lu.to_owned(),
                        count,
                        proportion: count as f64 / total as f64,
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(FrameTally { languages })
}

impl FrameTally {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tally serializes")
    }

    /// One stacked column per language; segments ordered by frame then LU,
    /// coloured by frame, heights proportional to counts.
    pub fn to_svg(&self) -> String {
        const BAR: f64 = 90.0;
        const GAP: f64 = 150.0;
        const HEIGHT: f64 = 400.0;
        const TOP: f64 = 40.0;
        let frames: Vec<&str> = {
            let mut f: Vec<&str> = self
                .languages
                .iter()
                .flat_map(|l| l.cells.iter().map(|c| c.frame.as_str()))
                .collect();
            f.sort();
            f.dedup();
            f
        };
        let colour = |frame: &str| {
            let i = frames.binary_search(&frame).unwrap_or(0);
            svg::PALETTE[i % svg::PALETTE.len()]
        };
        let legend_height = 16.0 * frames.len() as f64;
        let width = 60.0 + GAP * self.languages.len() as f64 + 220.0;
        let mut doc = Svg::new(width, TOP + HEIGHT + 40.0 + legend_height);
        for (li, lang) in self.languages.iter().enumerate() {
            let x = 60.0 + GAP * li as f64;
            let mut y = TOP + HEIGHT;
            for cell in &lang.cells {
                let h = cell.proportion * HEIGHT;
                y -= h;
                doc.rect(x, y, BAR, h, colour(&cell.frame), Some("#ffffff"));
                if h >= 10.0 {
                    doc.text(
                        x + BAR + 4.0,
                        y + h / 2.0 + 4.0,
                        10.0,
                        "start",
                        None,
                        &format!("{} {:.0}%", cell.lu, cell.proportion * 100.0),
                    );
                }
            }
            doc.text(x + BAR / 2.0, TOP + HEIGHT + 18.0, 12.0, "middle", None, &lang.language);
        }
        for (i, f) in frames.iter().enumerate() {
            let y = TOP + HEIGHT + 36.0 + 16.0 * i as f64;
            doc.rect(60.0, y - 9.0, 10.0, 10.0, colour(f), None);
            doc.text(76.0, y, 11.0, "start", None, f);
        }
        doc.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(language: &str, lu: &str, frame: &str, id: usize) -> Annotation {
        Annotation {
            language: language.into(),
            lu: lu.into(),
            frame: frame.into(),
            instance_id: id.to_string(),
        }
    }

    #[test]
    fn proportions_per_language() {
        let mut a: Vec<Annotation> = (0..63).map(|i| ann("zh", "shang", "Negative_product_impact", i)).collect();
        a.extend((63..100).map(|i| ann("zh", "sunhai", "Damaging", i)));
        a.push(ann("en", "harm", "Damaging", 0));
        let t = frame_tally(&a).unwrap();
        let zh = t.languages.iter().find(|l| l.language == "zh").unwrap();
        let cell = zh.cells.iter().find(|c| c.lu == "shang").unwrap();
        assert!((cell.proportion - 0.63).abs() < 1e-15);
        for l in &t.languages {
            let s: f64 = l.cells.iter().map(|c| c.proportion).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let en = t.languages.iter().find(|l| l.language == "en").unwrap();
        assert_eq!(en.cells.len(), 1);
        assert_eq!(en.cells[0].proportion, 1.0);
    }

    #[test]
    fn parse_with_header() {
        let a = parse_annotations("language\tlu\tframe\tinstance_id\nzh\tshang\tDamaging\t1\n\n").unwrap();
        assert_eq!(a, [ann("zh", "shang", "Damaging", 1)]);
        assert!(matches!(
            parse_annotations("zh\tshang\n"),
            Err(Error::Parse { index: 1, .. })
        ));
        assert!(frame_tally(&[]).is_err());
    }
}
