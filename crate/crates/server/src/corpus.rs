//! Deterministic generation of the fictitious-site fixture corpus: themed
//! personal/business pages whose facts are known exactly, so defense
//! success can be measured against ground truth.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use arshield_core::manifest::{CorpusManifest, SiteManifest};
use arshield_core::text::normalize;
use arshield_core::RawHtml;

use crate::error::ServerError;

/// Site themes, cycled in order when generating more sites than themes.
pub const CATEGORIES: [&str; 10] = [
    "personal-academic",
    "portfolio",
    "real-estate",
    "photography",
    "ev-company",
    "tech-landing",
    "news",
    "app-landing",
    "writing-portfolio",
    "education",
];

/// How many of the leading fixtures stand in for real, already-indexed
/// homepages (always indexable).
pub const REAL_ANALOG_COUNT: usize = 2;

/// One generated fixture: ground-truth manifest plus the page itself.
#[derive(Debug, Clone)]
pub struct SiteFixture {
    pub manifest: SiteManifest,
    pub html: RawHtml,
}

const FIRST_NAMES: [&str; 16] = [
    "Mira", "Tomas", "Ingrid", "Rafael", "Yuki", "Priya", "Anders", "Leona", "Marcus", "Sofia",
    "Teodor", "Amara", "Felix", "Noor", "Casper", "Ida",
];

const LAST_NAMES: [&str; 16] = [
    "Ellison", "Vasquez", "Holmberg", "Okafor", "Lindqvist", "Carver", "Nakae", "Rosales",
    "Thornberg", "Halvorsen", "Mistry", "Kowalski", "Brandt", "Solano", "Ferris", "Agarwal",
];

const CITIES: [&str; 12] = [
    "Harwick", "Dunmore", "Velstrand", "Ostermoor", "Caldwell", "Brightling", "Fairholt",
    "Westgrove", "Larkspur", "Covehaven", "Midlothian", "Arbor Point",
];

/// Per-category topic pools; indirect queries mention these.
fn topic_pool(category: &str) -> &'static [&'static str] {
    match category {
        "personal-academic" => &["tidal energy modeling", "archival linguistics", "soil microbiomes", "urban acoustics"],
        "portfolio" => &["brand identity design", "interactive installations", "type design"],
        "real-estate" => &["lakefront homes", "restored townhouses", "hillside cottages"],
        "photography" => &["wildlife portraits", "alpine landscapes", "street photography"],
        "ev-company" => &["electric delivery vans", "compact electric trucks", "battery swapping"],
        "tech-landing" => &["edge caching", "telemetry pipelines", "offline-first sync"],
        "news" => &["harbor district reporting", "regional transit coverage", "local election analysis"],
        "app-landing" => &["habit tracking", "meal planning", "language drilling"],
        "writing-portfolio" => &["science essays", "travel reportage", "food criticism"],
        "education" => &["evening pottery courses", "weekend coding camps", "music theory classes"],
        _ => &["general interest"],
    }
}

struct SiteSeed {
    entity: String,
    title: String,
    topic: String,
    city: String,
    tagline: String,
    /// Nine fact sentences (stored without their terminal period).
    facts: Vec<String>,
}

/// Generate `n` fixture sites deterministically from `seed`. Themes cycle
/// through [`CATEGORIES`]; the first [`REAL_ANALOG_COUNT`] fixtures are
/// flagged as real-homepage analogs and every fixture starts indexable.
pub fn generate_corpus(n: usize, seed: u64) -> Result<Vec<SiteFixture>, ServerError> {
    if n == 0 {
        return Err(ServerError::Corpus("corpus size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Shuffle name/city assignments once so sites never collide on entities.
    let mut firsts: Vec<&str> = FIRST_NAMES.to_vec();
    let mut lasts: Vec<&str> = LAST_NAMES.to_vec();
    let mut cities: Vec<&str> = CITIES.to_vec();
    firsts.shuffle(&mut rng);
    lasts.shuffle(&mut rng);
    cities.shuffle(&mut rng);

    let mut fixtures = Vec::with_capacity(n);
    let mut category_uses = std::collections::HashMap::<&str, usize>::new();
    for i in 0..n {
        let category = CATEGORIES[i % CATEGORIES.len()];
        let occurrence = *category_uses
            .entry(category)
            .and_modify(|c| *c += 1)
            .or_insert(0);
        let id = format!("s{:02}", i + 1);
        let first = unique_pick(&firsts, i);
        let last = unique_pick(&lasts, i);
        let city = unique_pick(&cities, i);
        let topics = topic_pool(category);
        let topic = topics[(occurrence + rng.random_range(0..topics.len())) % topics.len()];
        let site = compose_site(category, &first, &last, &city, topic, &mut rng);
        let html = render_site_page(&site);
        let page = RawHtml::new(html).map_err(|e| ServerError::Corpus(e.to_string()))?;
        let manifest = SiteManifest {
            id: id.clone(),
            category: category.to_owned(),
            title: site.title.clone(),
            entity: site.entity.clone(),
            topic: site.topic.clone(),
            page_path: format!("sites/{id}/index.html"),
            url_path: format!("/sites/{id}/index.html"),
            indexable: true,
            real_homepage_analog: i < REAL_ANALOG_COUNT,
            facts: site.facts.iter().map(|f| normalize(f)).collect(),
        };
        fixtures.push(SiteFixture { manifest, html: page });
    }
    Ok(fixtures)
}

/// Pool pick that stays unique while the pool lasts, then suffixes.
fn unique_pick<'a>(pool: &[&'a str], i: usize) -> String {
    let base = pool[i % pool.len()];
    if i < pool.len() {
        base.to_owned()
    } else {
        format!("{base} {}", i / pool.len() + 1)
    }
}

fn compose_site(
    category: &str,
    first: &str,
    last: &str,
    city: &str,
    topic: &str,
    rng: &mut ChaCha8Rng,
) -> SiteSeed {
    let year = rng.random_range(1987..2021);
    let count_a = rng.random_range(12..90);
    let count_b = rng.random_range(3..12);
    let f = |s: String| s;
    match category {
        "personal-academic" => {
            let entity = format!("Professor {first} {last}");
            let lab = format!("{} Lab", title_word(topic));
            SiteSeed {
                title: format!("{entity} — {}", capitalize(topic)),
                tagline: format!("Research notes and teaching from {city}"),
                facts: vec![
                    f(format!("{entity} is an associate professor at {city} Institute")),
                    f(format!("{entity} leads the {lab} within the department of applied science")),
                    f(format!("The {lab} focuses on {topic} and field instrumentation")),
                    f(format!("{entity} earned a doctorate in {year} after fieldwork abroad")),
                    f(format!("The group has published {count_a} peer reviewed articles so far")),
                    f(format!("{count_b} graduate students currently work in the {lab}")),
                    f(format!("{entity} teaches a seminar on {topic} every autumn term")),
                    f(format!("Office hours run on Tuesday mornings in building C")),
                    f(format!("The lab hosts an open demonstration day each May")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
        "portfolio" => {
            let entity = format!("{first} {last}");
            SiteSeed {
                title: format!("{entity} — {} Portfolio", capitalize(topic)),
                tagline: format!("Selected work from {city}"),
                facts: vec![
                    f(format!("{entity} is an independent designer working on {topic}")),
                    f(format!("The studio opened in {city} in {year}")),
                    f(format!("{entity} has delivered {count_a} client projects to date")),
                    f(format!("Recent commissions include museum wayfinding and festival identities")),
                    f(format!("{entity} mentors {count_b} junior designers through a local guild")),
                    f(format!("The practice favors print first processes and hand lettering")),
                    f(format!("A retrospective of the studio toured three galleries last year")),
                    f(format!("New commissions open every January and July")),
                    f(format!("The studio keeps a public archive of process sketches")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
        "real-estate" => {
            let entity = format!("{last} & Vance Realty");
            SiteSeed {
                title: format!("{entity} — {}", capitalize(topic)),
                tagline: format!("Listings across greater {city}"),
                facts: vec![
                    f(format!("{entity} is a family run agency based in {city}")),
                    f(format!("The agency has brokered {count_a} sales since {year}")),
                    f(format!("{entity} specializes in {topic} and estate appraisals")),
                    f(format!("A team of {count_b} licensed agents covers the region")),
                    f(format!("The office sits on Main Street opposite the clock tower")),
                    f(format!("{entity} publishes a quarterly market report for buyers")),
                    f(format!("Private viewings can be booked on weekday evenings")),
                    f(format!("The agency sponsors the {city} rowing club each season")),
                    f(format!("Valuations are free for first time sellers")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
        "photography" => {
            let entity = format!("{first} {last} Photography");
            SiteSeed {
                title: format!("{entity} — {}", capitalize(topic)),
                tagline: format!("Field work from around {city}"),
                facts: vec![
                    f(format!("{entity} is the studio of a documentary photographer in {city}")),
                    f(format!("The studio has specialized in {topic} since {year}")),
                    f(format!("{count_a} expeditions have been completed across four continents")),
                    f(format!("Prints are produced in editions of {count_b} on cotton paper")),
                    f(format!("The work has appeared in {count_b} international exhibitions")),
                    f(format!("Workshops on field technique run every spring")),
                    f(format!("The studio licenses images for conservation campaigns")),
                    f(format!("A monograph of early work was published in {year}")),
                    f(format!("Commissions are accepted for long form photo essays")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
        "ev-company" => {
            let entity = format!("{}Volt Motors", title_word(city));
            SiteSeed {
                title: format!("{entity} — {}", capitalize(topic)),
                tagline: format!("Electric mobility built in {city}"),
                facts: vec![
                    f(format!("{entity} designs {topic} for urban fleets")),
                    f(format!("The company was founded in {city} in {year}")),
                    f(format!("{entity} employs {count_a} engineers across two plants")),
                    f(format!("The flagship model travels {count_a}0 kilometers per charge")),
                    f(format!("{count_b} municipal fleets run the company's vehicles today")),
                    f(format!("Battery packs carry an eight year warranty")),
                    f(format!("A new assembly line opens next quarter")),
                    f(format!("{entity} operates a rider training program for fleet drivers")),
                    f(format!("All chassis components are sourced regionally")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
        "tech-landing" => {
            let entity = format!("{}gate Labs", title_word(last));
            SiteSeed {
                title: format!("{entity} — {}", capitalize(topic)),
                tagline: format!("Infrastructure software from {city}"),
                facts: vec![
                    f(format!("{entity} builds an {topic} platform for product teams")),
                    f(format!("The company started in {city} in {year}")),
                    f(format!("{entity} serves {count_a} production customers worldwide")),
                    f(format!("The platform processes {count_a} million events per day")),
                    f(format!("A free tier covers {count_b} projects per organization")),
                    f(format!("{entity} publishes uptime figures every month")),
                    f(format!("The engineering team works fully remote across five time zones")),
                    f(format!("An on call handbook is shared openly with customers")),
                    f(format!("Enterprise onboarding takes under two weeks")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
        "news" => {
            let entity = format!("The {city} Ledger");
            SiteSeed {
                title: format!("{entity} — {}", capitalize(topic)),
                tagline: format!("Independent reporting for {city}"),
                facts: vec![
                    f(format!("{entity} is an independent newsroom covering {topic}")),
                    f(format!("The paper has published continuously since {year}")),
                    f(format!("A staff of {count_b} reporters files daily dispatches")),
                    f(format!("{entity} reaches {count_a} thousand readers every week")),
                    f(format!("The newsroom operates reader funded without advertising")),
                    f(format!("An investigative desk publishes one major series per quarter")),
                    f(format!("Community meetings are hosted in the library each month")),
                    f(format!("Archives back to {year} are open to the public")),
                    f(format!("Corrections are printed prominently on page two")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
        "app-landing" => {
            let entity = format!("{}ly", title_word(first));
            SiteSeed {
                title: format!("{entity} — {} App", capitalize(topic)),
                tagline: format!("Made by a small team in {city}"),
                facts: vec![
                    f(format!("{entity} is a {topic} app for busy households")),
                    f(format!("The app launched in {year} after a year of beta testing")),
                    f(format!("{entity} has {count_a} thousand active users this month")),
                    f(format!("Streak reminders adapt to each user's schedule")),
                    f(format!("A family plan covers {count_b} member profiles")),
                    f(format!("All data can be exported in open formats")),
                    f(format!("The roadmap is published and voted on by users")),
                    f(format!("{entity} donates one percent of revenue to digital literacy")),
                    f(format!("Support replies arrive within one business day")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
        "writing-portfolio" => {
            let entity = format!("{first} {last}");
            SiteSeed {
                title: format!("{entity} — {}", capitalize(topic)),
                tagline: format!("Essays and features from {city}"),
                facts: vec![
                    f(format!("{entity} is a freelance writer focused on {topic}")),
                    f(format!("Bylines have appeared in {count_b} national magazines")),
                    f(format!("{entity} has filed stories from {count_b} countries since {year}")),
                    f(format!("A weekly newsletter reaches {count_a} hundred subscribers")),
                    f(format!("The archive holds over {count_a} published pieces")),
                    f(format!("{entity} teaches a narrative workshop each winter in {city}")),
                    f(format!("An essay collection is under contract for next year")),
                    f(format!("Editorial inquiries are answered on Fridays")),
                    f(format!("Speaking engagements are booked through the contact page")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
        _ => {
            let entity = format!("{city} Learning Collective");
            SiteSeed {
                title: format!("{entity} — {}", capitalize(topic)),
                tagline: format!("Community classes in {city}"),
                facts: vec![
                    f(format!("{entity} runs {topic} for adult learners")),
                    f(format!("The collective was founded by volunteers in {year}")),
                    f(format!("{count_a} students enrolled across last season's terms")),
                    f(format!("Classes meet in {count_b} neighborhood studios")),
                    f(format!("Scholarships cover one seat in every class")),
                    f(format!("Instructors are practicing professionals from {city}")),
                    f(format!("A showcase evening closes every eight week term")),
                    f(format!("Course catalogs are mailed twice a year")),
                    f(format!("Registration opens the first Monday of each term")),
                ],
                entity,
                topic: topic.to_owned(),
                city: city.to_owned(),
            }
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// First word of a phrase, capitalized — used to coin company-ish names.
fn title_word(s: &str) -> String {
    capitalize(s.split_whitespace().next().unwrap_or("Nova"))
}

/// Render the page. Facts land verbatim (plus a terminal period) in the
/// visible body; the layout keeps five top-level body elements so top /
/// middle / bottom injections are clearly distinguishable.
fn render_site_page(site: &SiteSeed) -> String {
    let about: String = site.facts[0..3]
        .iter()
        .map(|fact| format!("<p>{fact}.</p>"))
        .collect();
    let details: String = site.facts[3..6]
        .iter()
        .map(|fact| format!("<p>{fact}.</p>"))
        .collect();
    let notes: String = site.facts[6..]
        .iter()
        .map(|fact| format!("<p>{fact}.</p>"))
        .collect();
    format!(
        "<!doctype html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{title}</title>\n\
         <style>body {{ font-family: serif; margin: 2rem auto; max-width: 42rem; }} \
         header h1 {{ letter-spacing: 0.02em; }} footer {{ color: #555; }}</style>\n</head>\n\
         <body>\n<header><h1>{title}</h1><p>{tagline}</p></header>\n\
         <section id=\"about\"><h2>About</h2>{about}</section>\n\
         <section id=\"details\"><h2>In Detail</h2>{details}</section>\n\
         <section id=\"notes\"><h2>Notes</h2>{notes}</section>\n\
         <footer><p>{entity} · {city}</p></footer>\n</body>\n</html>\n",
        title = site.title,
        tagline = site.tagline,
        about = about,
        details = details,
        notes = notes,
        entity = site.entity,
        city = site.city,
    )
}

/// Write fixtures to `dir`: `manifest.json` plus `sites/<id>/index.html`.
pub fn write_corpus(dir: &Path, seed: u64, fixtures: &[SiteFixture]) -> Result<(), ServerError> {
    let manifest = CorpusManifest {
        seed,
        sites: fixtures.iter().map(|f| f.manifest.clone()).collect(),
    };
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    for fixture in fixtures {
        let page_dir = dir.join("sites").join(&fixture.manifest.id);
        fs::create_dir_all(&page_dir)?;
        fs::write(page_dir.join("index.html"), fixture.html.as_str())?;
    }
    Ok(())
}

/// Load a corpus directory written by [`write_corpus`].
pub fn load_corpus(dir: &Path) -> Result<(CorpusManifest, Vec<SiteFixture>), ServerError> {
    let manifest: CorpusManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut fixtures = Vec::with_capacity(manifest.sites.len());
    for site in &manifest.sites {
        let html = fs::read_to_string(dir.join(&site.page_path))?;
        let html = RawHtml::new(html).map_err(|e| ServerError::Corpus(e.to_string()))?;
        fixtures.push(SiteFixture { manifest: site.clone(), html });
    }
    Ok((manifest, fixtures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use arshield_core::html::{extract_visible, ViewProfile};

    #[test]
    fn generation_is_byte_stable_under_a_seed() {
        let a = generate_corpus(12, 7).unwrap();
        let b = generate_corpus(12, 7).unwrap();
        assert_eq!(a.len(), 12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.html.as_str(), y.html.as_str());
            assert_eq!(x.manifest, y.manifest);
        }
        // A different seed changes content.
        let c = generate_corpus(12, 8).unwrap();
        assert_ne!(a[0].html.as_str(), c[0].html.as_str());
    }

    #[test]
    fn ten_sites_cover_all_ten_themes() {
        let fixtures = generate_corpus(10, 3).unwrap();
        let categories: Vec<&str> =
            fixtures.iter().map(|f| f.manifest.category.as_str()).collect();
        assert_eq!(categories, CATEGORIES.to_vec());
    }

    #[test]
    fn twelve_sites_flag_two_real_analogs_and_keep_all_themes_elsewhere() {
        let fixtures = generate_corpus(12, 3).unwrap();
        let analogs: Vec<&str> = fixtures
            .iter()
            .filter(|f| f.manifest.real_homepage_analog)
            .map(|f| f.manifest.id.as_str())
            .collect();
        assert_eq!(analogs, vec!["s01", "s02"]);
        assert!(fixtures.iter().all(|f| f.manifest.indexable));
        // The non-analog ten cover every theme.
        let mut rest: Vec<&str> = fixtures[2..]
            .iter()
            .map(|f| f.manifest.category.as_str())
            .collect();
        rest.sort_unstable();
        let mut want = CATEGORIES.to_vec();
        want.sort_unstable();
        assert_eq!(rest, want);
    }

    #[test]
    fn every_fact_appears_verbatim_in_the_human_view() {
        for fixture in generate_corpus(12, 11).unwrap() {
            let human = extract_visible(&fixture.html, ViewProfile::HumanView);
            assert!(fixture.manifest.facts.len() >= 8, "{}", fixture.manifest.id);
            for fact in &fixture.manifest.facts {
                assert!(
                    human.text.contains(fact.as_str()),
                    "fact `{fact}` missing from {}",
                    fixture.manifest.id
                );
            }
        }
    }

    #[test]
    fn entities_are_unique_across_the_corpus() {
        let fixtures = generate_corpus(12, 5).unwrap();
        let mut entities: Vec<&str> =
            fixtures.iter().map(|f| f.manifest.entity.as_str()).collect();
        entities.sort_unstable();
        entities.dedup();
        assert_eq!(entities.len(), fixtures.len());
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let fixtures = generate_corpus(4, 99).unwrap();
        write_corpus(dir.path(), 99, &fixtures).unwrap();
        let (manifest, loaded) = load_corpus(dir.path()).unwrap();
        assert_eq!(manifest.seed, 99);
        assert_eq!(loaded.len(), 4);
        for (a, b) in fixtures.iter().zip(&loaded) {
            assert_eq!(a.manifest, b.manifest);
            assert_eq!(a.html.as_str(), b.html.as_str());
        }
    }

    #[test]
    fn zero_sites_is_an_error() {
        assert!(generate_corpus(0, 1).is_err());
    }

    #[test]
    fn pages_have_enough_body_elements_for_positional_injection() {
        use arshield_core::html::DomTree;
        for fixture in generate_corpus(12, 2).unwrap() {
            let tree = DomTree::parse(fixture.html.as_str());
            let body = tree.body_scope();
            assert!(tree.element_children(body).len() >= 5, "{}", fixture.manifest.id);
        }
    }
}
