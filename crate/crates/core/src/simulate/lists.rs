use std::collections::HashSet;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurespace::SparseInstance;
use crate::models::Model;
use crate::numerics::{rng_stream, sigmoid, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct App {
    pub id: u32,
    pub app_type: usize,
    /// Historical cumulative downloads.
    pub downloads: u64,
}

/// Candidate apps, each belonging to one of `types` pools. App ids are dense
/// in `[0, apps.len())`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub types: usize,
    pub apps: Vec<App>,
}

impl Catalog {
    /// `per_type` apps per type with Zipf-like download counts.
    pub fn generate(types: usize, per_type: usize, seed: u64) -> Result<Self> {
        if types == 0 || per_type == 0 {
            return Err(Error::Parameter("a catalog needs at least one type and one app per type".into()));
        }
        let mut rng = rng_stream(seed, 11);
        let n = types * per_type;
        let mut ranks: Vec<usize> = (1..=n).collect();
        ranks.shuffle(&mut rng);
        let apps = (0..n)
            .map(|i| App {
                id: i as u32,
                app_type: i / per_type,
                downloads: (1_000_000.0 / ranks[i] as f64).round() as u64,
            })
            .collect();
        Ok(Self { types, apps })
    }

    pub fn validate(&self) -> Result<()> {
        if self.types == 0 || self.apps.is_empty() {
            return Err(Error::Parameter("empty catalog".into()));
        }
        for (i, app) in self.apps.iter().enumerate() {
            if app.id as usize != i {
                return Err(Error::Parameter(format!("app ids must be dense, found {} at {i}", app.id)));
            }
            if app.app_type >= self.types {
                return Err(Error::Parameter(format!("app {} has type {} of {}", app.id, app.app_type, self.types)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.apps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apps.is_empty()
    }

    /// `D_max` over the whole catalog.
    pub fn d_max(&self) -> u64 {
        self.apps.iter().map(|a| a.downloads).max().unwrap_or(0)
    }

    pub fn downloads(&self) -> Vec<u64> {
        self.apps.iter().map(|a| a.downloads).collect()
    }

    pub fn pool(&self, app_type: usize) -> Vec<u32> {
        self.apps.iter().filter(|a| a.app_type == app_type).map(|a| a.id).collect()
    }

    pub fn ids(&self) -> Vec<u32> {
        (0..self.apps.len() as u32).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Catalog = serde_json::from_str(&text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: usize,
    pub group: usize,
    pub history: Vec<u32>,
}

/// `t` typed groups of `n` users each; users `[g·n, (g+1)·n)` form group `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGroupSet {
    pub t: usize,
    pub n: usize,
    pub users: Vec<User>,
}

impl UserGroupSet {
    pub fn groups(&self) -> Vec<usize> {
        self.users.iter().map(|u| u.group).collect()
    }
}

/// Users of type `g` download `history_len` distinct apps from pool `g`.
pub fn generate_users(t: usize, n: usize, catalog: &Catalog, history_len: usize, seed: u64) -> Result<UserGroupSet> {
    if t == 0 || t > catalog.types {
        return Err(Error::Parameter(format!("t = {t} but the catalog has {} types", catalog.types)));
    }
    let mut rng = rng_stream(seed, 12);
    let mut users = Vec::with_capacity(t * n);
    for g in 0..t {
        let pool = catalog.pool(g);
        if pool.len() < history_len {
            return Err(Error::Parameter(format!(
                "pool {g} holds {} apps, fewer than history length {history_len}",
                pool.len()
            )));
        }
        for _ in 0..n {
            let history = pool.choose_multiple(&mut rng, history_len).copied().collect();
            users.push(User { id: users.len(), group: g, history });
        }
    }
    Ok(UserGroupSet { t, n, users })
}

/// Maps (user, candidate app) to a sparse instance: one field per history
/// slot (an extra "empty" value pads short histories) and one field for the
/// candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAppEncoder {
    pub history_len: usize,
    pub num_apps: usize,
}

impl UserAppEncoder {
    pub fn num_fields(&self) -> usize {
        self.history_len + 1
    }

    pub fn num_features(&self) -> usize {
        self.history_len * (self.num_apps + 1) + self.num_apps
    }

    pub fn encode(&self, user: &User, app: u32, label: u8) -> SparseInstance {
        let slot = self.num_apps + 1;
        let mut ids = Vec::with_capacity(self.num_fields());
        for h in 0..self.history_len {
            let local = user.history.get(h).map_or(self.num_apps, |&a| a as usize);
            ids.push((h * slot + local) as u32);
        }
        ids.push((self.history_len * slot + app as usize) as u32);
        SparseInstance { ids, values: vec![1.0; self.num_fields()], label }
    }
}

/// Ground-truth download propensity of a user for an app.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClickModel {
    pub bias: f64,
    /// Logit bonus when the app's type matches the user's group.
    pub affinity: f64,
    /// Weight on `ln(D / D_max)`.
    pub popularity: f64,
}

impl Default for ClickModel {
    fn default() -> Self {
        Self { bias: -2.0, affinity: 3.0, popularity: 0.3 }
    }
}

impl ClickModel {
    pub fn probability(&self, catalog: &Catalog, user: &User, app: u32) -> f64 {
        let a = &catalog.apps[app as usize];
        let same = if a.app_type == user.group { 1.0 } else { 0.0 };
        let pop = ((a.downloads.max(1)) as f64 / catalog.d_max().max(1) as f64).ln();
        sigmoid(self.bias + self.affinity * same + self.popularity * pop)
    }
}

/// Simulated impression log: each user sees `impressions` random apps and
/// downloads each with the click model's probability.
pub fn click_log(
    users: &UserGroupSet,
    catalog: &Catalog,
    encoder: &UserAppEncoder,
    clicks: &ClickModel,
    impressions: usize,
    seed: u64,
) -> Vec<SparseInstance> {
    let mut rng = rng_stream(seed, 13);
    let mut out = Vec::with_capacity(users.users.len() * impressions);
    for user in &users.users {
        for _ in 0..impressions {
            let app = rng.random_range(0..catalog.len()) as u32;
            let label = u8::from(rng.random::<f64>() < clicks.probability(catalog, user, app));
            out.push(encoder.encode(user, app, label));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub user: usize,
    /// Candidates by descending score.
    pub apps: Vec<u32>,
}

/// Ranks `candidates` for each user by descending `score(user, app)`, ties
/// broken by ascending app id.
pub fn recommend_with<F>(users: &[User], candidates: &[u32], mut score: F) -> Vec<RecommendationList>
where
    F: FnMut(&User, u32) -> f64,
{
    users
        .iter()
        .map(|user| {
            let mut scored: Vec<(f64, u32)> = candidates.iter().map(|&a| (score(user, a), a)).collect();
            scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
            RecommendationList { user: user.id, apps: scored.into_iter().map(|(_, a)| a).collect() }
        })
        .collect()
}

/// Ranks candidates with a trained model's predicted probabilities.
pub fn recommend<T: Scalar>(
    model: &Model<T>,
    encoder: &UserAppEncoder,
    users: &[User],
    candidates: &[u32],
) -> Result<Vec<RecommendationList>> {
    if model.num_fields != encoder.num_fields() || model.num_features != encoder.num_features() {
        return Err(Error::dim(
            "recommendation model",
            format!("{} fields / {} features", encoder.num_fields(), encoder.num_features()),
            format!("{} fields / {} features", model.num_fields, model.num_features),
        ));
    }
    let mut lists = Vec::with_capacity(users.len());
    for user in users {
        let batch: Vec<SparseInstance> = candidates.iter().map(|&a| encoder.encode(user, a, 0)).collect();
        let probs = model.predict(&batch)?;
        let mut scored: Vec<(f64, u32)> = probs.iter().map(|p| p.as_f64()).zip(candidates.iter().copied()).collect();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        lists.push(RecommendationList { user: user.id, apps: scored.into_iter().map(|(_, a)| a).collect() });
    }
    Ok(lists)
}

fn top(list: &RecommendationList, l: usize) -> Result<&[u32]> {
    if list.apps.len() < l {
        return Err(Error::Parameter(format!(
            "list of user {} has {} items, fewer than L = {l}",
            list.user,
            list.apps.len()
        )));
    }
    Ok(&list.apps[..l])
}

/// `h_ab = 1 − q_ab(L)/L`, with `q_ab(L)` the number of shared top-L items.
pub fn inter_list_distance(a: &RecommendationList, b: &RecommendationList, l: usize) -> Result<f64> {
    if l == 0 {
        return Err(Error::Parameter("L must be at least 1".into()));
    }
    let ta: HashSet<u32> = top(a, l)?.iter().copied().collect();
    let q = top(b, l)?.iter().filter(|x| ta.contains(x)).count();
    Ok(1.0 - q as f64 / l as f64)
}

/// Personalization@L: `h_ab` averaged over all user pairs of each pair of
/// groups, then averaged over the `t(t−1)/2` group pairs.
///
/// `groups[u]` is the group of `lists[u]`'s user.
pub fn personalization_at(lists: &[RecommendationList], groups: &[usize], l: usize) -> Result<f64> {
    if lists.len() != groups.len() {
        return Err(Error::dim("personalization inputs", lists.len(), groups.len()));
    }
    let t = groups.iter().max().map_or(0, |g| g + 1);
    let members: Vec<Vec<usize>> = (0..t).map(|g| (0..groups.len()).filter(|&u| groups[u] == g).collect()).collect();
    if t < 2 || members.iter().any(Vec::is_empty) {
        return Err(Error::Parameter("personalization needs at least two non-empty groups".into()));
    }
    let sets: Vec<HashSet<u32>> =
        lists.iter().map(|x| top(x, l).map(|s| s.iter().copied().collect())).collect::<Result<_>>()?;
    let mut total = 0.0;
    for i in 0..t {
        for j in i + 1..t {
            let mut sum = 0.0;
            for &a in &members[i] {
                for &b in &members[j] {
                    let q = sets[a].intersection(&sets[b]).count();
                    sum += 1.0 - q as f64 / l as f64;
                }
            }
            total += sum / (members[i].len() * members[j].len()) as f64;
        }
    }
    Ok(total * 2.0 / (t * (t - 1)) as f64)
}

/// Coverage@L: distinct apps in any top-L, over the candidate count.
pub fn coverage_at(lists: &[RecommendationList], candidate_count: usize, l: usize) -> Result<f64> {
    if candidate_count == 0 {
        return Err(Error::Parameter("candidate count must be positive".into()));
    }
    let mut seen = HashSet::new();
    for list in lists {
        seen.extend(top(list, l)?.iter().copied());
    }
    Ok(seen.len() as f64 / candidate_count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Popularity {
    /// Mean of `D_k / D_max` over every top-L slot of every list.
    pub mean: f64,
    /// Population variance of the per-list means.
    pub variance: f64,
}

/// Popularity@L with `downloads[app]` giving `D_k`.
pub fn popularity_at(lists: &[RecommendationList], downloads: &[u64], l: usize, d_max: u64) -> Result<Popularity> {
    if d_max == 0 {
        return Err(Error::Parameter("D_max must be positive".into()));
    }
    if lists.is_empty() || l == 0 {
        return Err(Error::Parameter("popularity needs at least one list and L ≥ 1".into()));
    }
    let per_list: Vec<f64> = lists
        .iter()
        .map(|list| {
            let items = top(list, l)?;
            let mut s = 0.0;
            for &a in items {
                let d = *downloads.get(a as usize).ok_or(Error::Index {
                    what: "app",
                    index: a as usize,
                    bound: downloads.len(),
                })?;
                s += d as f64 / d_max as f64;
            }
            Ok(s / l as f64)
        })
        .collect::<Result<_>>()?;
    let n = per_list.len() as f64;
    let mean = per_list.iter().sum::<f64>() / n;
    let variance = per_list.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(Popularity { mean, variance })
}

/// Downloads per impression.
pub fn ctr(downloads: u64, impressions: u64) -> Result<f64> {
    if impressions == 0 {
        return Err(Error::UndefinedMetric("CTR with no impressions".into()));
    }
    Ok(downloads as f64 / impressions as f64)
}

/// Downloads per visiting user.
pub fn cvr(downloads: u64, users: u64) -> Result<f64> {
    if users == 0 {
        return Err(Error::UndefinedMetric("CVR with no users".into()));
    }
    Ok(downloads as f64 / users as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbRow {
    pub l: usize,
    pub model: String,
    pub personalization: f64,
    pub coverage: f64,
    pub popularity_mean: f64,
    pub popularity_variance: f64,
    pub ctr: Option<f64>,
    pub cvr: Option<f64>,
}

/// Side-by-side list metrics for two models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbReport {
    pub rows: Vec<AbRow>,
    /// `B − A` per L, in the same field layout.
    pub deltas: Vec<AbRow>,
}

/// Optional click simulation feeding the CTR/CVR columns.
pub struct ClickSim<'a> {
    pub users: &'a [User],
    pub clicks: ClickModel,
    pub seed: u64,
}

fn simulate_downloads(
    lists: &[RecommendationList],
    catalog: &Catalog,
    sim: &ClickSim<'_>,
    l: usize,
) -> Result<(u64, u64)> {
    let mut rng = rng_stream(sim.seed, l as u64);
    let (mut downloads, mut impressions) = (0u64, 0u64);
    for list in lists {
        let user = sim
            .users
            .iter()
            .find(|u| u.id == list.user)
            .ok_or_else(|| Error::Parameter(format!("no user {}", list.user)))?;
        for &a in top(list, l)? {
            impressions += 1;
            if rng.random::<f64>() < sim.clicks.probability(catalog, user, a) {
                downloads += 1;
            }
        }
    }
    Ok((downloads, impressions))
}

/// Personalization, coverage and popularity (mean, variance) of lists `a` and
/// `b` at each `L`, plus `b − a` deltas. With `sim`, downloads are simulated
/// over the top-L slots for CTR/CVR.
pub fn ab_report(
    a: &[RecommendationList],
    b: &[RecommendationList],
    groups: &[usize],
    catalog: &Catalog,
    ls: &[usize],
    sim: Option<&ClickSim<'_>>,
) -> Result<AbReport> {
    let users_a: Vec<usize> = a.iter().map(|x| x.user).collect();
    let users_b: Vec<usize> = b.iter().map(|x| x.user).collect();
    if users_a != users_b {
        return Err(Error::Parameter("the two list sets cover different users".into()));
    }
    let downloads = catalog.downloads();
    let d_max = catalog.d_max();
    let mut rows = Vec::new();
    let mut deltas = Vec::new();
    for &l in ls {
        let mut pair = Vec::with_capacity(2);
        for (name, lists) in [("A", a), ("B", b)] {
            let pop = popularity_at(lists, &downloads, l, d_max)?;
            let (ctr_v, cvr_v) = match sim {
                Some(s) => {
                    let (d, imp) = simulate_downloads(lists, catalog, s, l)?;
                    (Some(ctr(d, imp)?), Some(cvr(d, lists.len() as u64)?))
                }
                None => (None, None),
            };
            pair.push(AbRow {
                l,
                model: name.into(),
                personalization: personalization_at(lists, groups, l)?,
                coverage: coverage_at(lists, catalog.len(), l)?,
                popularity_mean: pop.mean,
                popularity_variance: pop.variance,
                ctr: ctr_v,
                cvr: cvr_v,
            });
        }
        let (ra, rb) = (&pair[0], &pair[1]);
        deltas.push(AbRow {
            l,
            model: "B-A".into(),
            personalization: rb.personalization - ra.personalization,
            coverage: rb.coverage - ra.coverage,
            popularity_mean: rb.popularity_mean - ra.popularity_mean,
            popularity_variance: rb.popularity_variance - ra.popularity_variance,
            ctr: rb.ctr.zip(ra.ctr).map(|(x, y)| x - y),
            cvr: rb.cvr.zip(ra.cvr).map(|(x, y)| x - y),
        });
        rows.extend(pair);
    }
    Ok(AbReport { rows, deltas })
}

pub fn write_ab_csv(path: &Path, report: &AbReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in report.rows.iter().chain(&report.deltas) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(user: usize, apps: &[u32]) -> RecommendationList {
        RecommendationList { user, apps: apps.to_vec() }
    }

    #[test]
    fn ranking_and_ties() {
        let users = [User { id: 0, group: 0, history: vec![] }];
        let scores = [0.2, 0.9, 0.5];
        let lists = recommend_with(&users, &[0, 1, 2], |_, a| scores[a as usize]);
        assert_eq!(lists[0].apps, vec![1, 2, 0]);
        let flat = recommend_with(&users, &[3, 1, 2], |_, _| 0.5);
        assert_eq!(flat[0].apps, vec![1, 2, 3]);
    }

    #[test]
    fn personalization_boundaries() {
        let same: Vec<_> = (0..4).map(|u| list(u, &[1, 2, 3])).collect();
        assert_eq!(personalization_at(&same, &[0, 0, 1, 1], 3).unwrap(), 0.0);
        let disjoint = vec![list(0, &[1, 2]), list(1, &[3, 4]), list(2, &[5, 6])];
        assert_eq!(personalization_at(&disjoint, &[0, 1, 2], 2).unwrap(), 1.0);
        // every cross-group pair shares exactly two of five
        let shared = vec![list(0, &[1, 2, 10, 11, 12]), list(1, &[1, 2, 20, 21, 22])];
        assert!((personalization_at(&shared, &[0, 1], 5).unwrap() - 0.6).abs() < 1e-15);
        assert!(personalization_at(&shared, &[0, 1], 6).is_err());
        assert!(personalization_at(&shared, &[0, 0], 5).is_err());
    }

    #[test]
    fn coverage_examples() {
        let lists: Vec<_> = (0..3).map(|u| list(u, &[4, 7, 1])).collect();
        assert_eq!(coverage_at(&lists, 10, 2).unwrap(), 0.2);
        let lists = vec![list(0, &[0, 1]), list(1, &[1, 2]), list(2, &[0, 2]), list(3, &[2, 1])];
        assert!((coverage_at(&lists, 10, 2).unwrap() - 0.3).abs() < 1e-15);
        let all: Vec<_> = (0..5).map(|u| list(u, &[2 * u as u32, 2 * u as u32 + 1])).collect();
        assert_eq!(coverage_at(&all, 10, 2).unwrap(), 1.0);
    }

    #[test]
    fn popularity_examples() {
        let one = vec![list(0, &[0, 1])];
        let p = popularity_at(&one, &[100, 50], 2, 100).unwrap();
        assert_eq!(p.mean, 0.75);
        assert_eq!(p.variance, 0.0);
        assert_eq!(popularity_at(&one, &[100, 100], 2, 100).unwrap().mean, 1.0);
        assert_eq!(popularity_at(&one, &[0, 0], 2, 100).unwrap().mean, 0.0);
        let two = vec![list(0, &[0]), list(1, &[1])];
        assert!((popularity_at(&two, &[100, 50], 1, 100).unwrap().variance - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn users_and_catalog() {
        let cat = Catalog::generate(6, 20, 1).unwrap();
        cat.validate().unwrap();
        let users = generate_users(6, 100, &cat, 5, 2).unwrap();
        assert_eq!(users.users.len(), 600);
        assert_eq!(users, generate_users(6, 100, &cat, 5, 2).unwrap());
        for u in &users.users {
            assert!(u.history.iter().all(|&a| cat.apps[a as usize].app_type == u.group));
            let distinct: HashSet<_> = u.history.iter().collect();
            assert_eq!(distinct.len(), 5);
        }
        let cold = generate_users(2, 3, &cat, 0, 2).unwrap();
        assert!(cold.users.iter().all(|u| u.history.is_empty()));
        assert!(generate_users(2, 3, &cat, 21, 2).is_err());
    }

    #[test]
    fn encoder_layout() {
        let enc = UserAppEncoder { history_len: 2, num_apps: 4 };
        let user = User { id: 0, group: 0, history: vec![3] };
        let inst = enc.encode(&user, 1, 1);
        assert_eq!(inst.ids, vec![3, 5 + 4, 10 + 1]);
        assert_eq!(enc.num_features(), 14);
    }

    #[test]
    fn identical_lists_have_zero_deltas() {
        let cat = Catalog::generate(2, 5, 0).unwrap();
        let lists = vec![list(0, &[0, 1, 2, 3, 4, 5]), list(1, &[5, 6, 7, 8, 9, 0])];
        let report = ab_report(&lists, &lists, &[0, 1], &cat, &[5], None).unwrap();
        assert_eq!(report.rows.len(), 2);
        let d = &report.deltas[0];
        assert_eq!((d.personalization, d.coverage, d.popularity_mean), (0.0, 0.0, 0.0));
        let other = vec![list(1, &[0, 1, 2, 3, 4]), list(0, &[0, 1, 2, 3, 4])];
        assert!(ab_report(&lists, &other, &[0, 1], &cat, &[5], None).is_err());
    }

    #[test]
    fn ratio_helpers() {
        assert_eq!(ctr(5, 100).unwrap(), 0.05);
        assert_eq!(cvr(30, 10).unwrap(), 3.0);
        assert!(ctr(1, 0).is_err());
    }
}
