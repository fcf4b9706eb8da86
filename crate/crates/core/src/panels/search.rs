//! Depth-first search over per-group seat counts.
//!
//! Groups are visited in index order and seat counts tried in ascending order, so
//! compositions come out in lexicographic order. Each node keeps the per-(f,v)
//! seat totals so far plus the capacity still available from unvisited groups,
//! which is enough to reject most dead branches early.

use crate::model::Instance;

pub(crate) struct CompositionSearch<'a> {
    inst: &'a Instance,
    min_seats: Vec<u32>,
    max_seats: Vec<u32>,
}

struct State {
    counts: Vec<u32>,
    taken: Vec<Vec<u32>>,
    // seats still obtainable per (f, v) from groups not yet visited
    room: Vec<Vec<u32>>,
    seats: u32,
    min_left: u32,
}

impl<'a> CompositionSearch<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let max_seats = inst
            .groups()
            .iter()
            .map(|g| (g.size() as u32).min(inst.k()))
            .collect();
        Self {
            inst,
            min_seats: vec![0; inst.groups().len()],
            max_seats,
        }
    }

    pub fn require(mut self, group: usize, seats: u32) -> Self {
        self.min_seats[group] = seats;
        self
    }

    fn initial_state(&self) -> State {
        let scheme = self.inst.scheme();
        let mut room: Vec<Vec<u32>> = (0..scheme.num_features())
            .map(|f| vec![0; scheme.values(f).len()])
            .collect();
        for (g, group) in self.inst.groups().iter().enumerate() {
            for (f, &v) in group.vector.0.iter().enumerate() {
                room[f][v as usize] += self.max_seats[g];
            }
        }
        State {
            counts: Vec::with_capacity(self.max_seats.len()),
            taken: room.iter().map(|r| vec![0; r.len()]).collect(),
            room,
            seats: 0,
            min_left: self.min_seats.iter().sum(),
        }
    }

    fn viable(&self, st: &State) -> bool {
        let k = self.inst.k();
        if st.seats > k {
            return false;
        }
        let need = k - st.seats;
        if st.min_left > need {
            return false;
        }
        for (f, row) in self.inst.quotas().iter().enumerate() {
            let mut deficit = 0;
            let mut slack = 0;
            for (v, q) in row.iter().enumerate() {
                let have = st.taken[f][v];
                if have > q.max {
                    return false;
                }
                if have + st.room[f][v] < q.min {
                    return false;
                }
                deficit += q.min.saturating_sub(have);
                slack += (q.max - have).min(st.room[f][v]);
            }
            if deficit > need || slack < need {
                return false;
            }
        }
        true
    }

    fn push(&self, st: &mut State, g: usize, c: u32) {
        let w = &self.inst.groups()[g].vector;
        for (f, &v) in w.0.iter().enumerate() {
            st.taken[f][v as usize] += c;
            st.room[f][v as usize] -= self.max_seats[g];
        }
        st.seats += c;
        st.min_left -= self.min_seats[g];
        st.counts.push(c);
    }

    fn pop(&self, st: &mut State, g: usize) {
        let c = st.counts.pop().expect("non-empty");
        let w = &self.inst.groups()[g].vector;
        for (f, &v) in w.0.iter().enumerate() {
            st.taken[f][v as usize] -= c;
            st.room[f][v as usize] += self.max_seats[g];
        }
        st.seats -= c;
        st.min_left += self.min_seats[g];
    }

    /// Visits every valid composition in lexicographic order until `visit` returns false.
    pub fn for_each(&self, mut visit: impl FnMut(&[u32]) -> bool) {
        let mut st = self.initial_state();
        if self.viable(&st) {
            self.walk(&mut st, &mut visit);
        }
    }

    fn walk(&self, st: &mut State, visit: &mut impl FnMut(&[u32]) -> bool) -> bool {
        let g = st.counts.len();
        if g == self.max_seats.len() {
            return if st.seats == self.inst.k() {
                visit(&st.counts)
            } else {
                true
            };
        }
        let hi = self.max_seats[g].min(self.inst.k() - st.seats);
        for c in self.min_seats[g]..=hi {
            self.push(st, g, c);
            let go_on = !self.viable(st) || self.walk(st, visit);
            self.pop(st, g);
            if !go_on {
                return false;
            }
        }
        true
    }

    pub fn any(&self) -> bool {
        let mut found = false;
        self.for_each(|_| {
            found = true;
            false
        });
        found
    }

    /// Maximizes `sum_g sum_{s < c_g} gains[g][s]` over valid compositions.
    ///
    /// `gains[g]` lists the value of each additional seat in group `g` and must be
    /// non-increasing. Among optimal compositions the lexicographically smallest
    /// is returned.
    pub fn best(&self, gains: &[Vec<f64>]) -> Option<(Vec<u32>, f64)> {
        let groups = self.max_seats.len();
        let k = self.inst.k() as usize;
        // bound[g][r]: sum of the r largest seat gains among groups g.., ignoring quotas
        let mut bound = vec![vec![0.0; k + 1]; groups + 1];
        let mut pool: Vec<f64> = Vec::new();
        for g in (0..groups).rev() {
            pool.extend(gains[g].iter().take(self.max_seats[g] as usize));
            pool.sort_by(|a, b| b.total_cmp(a));
            let mut acc = 0.0;
            for r in 1..=k {
                match pool.get(r - 1) {
                    Some(x) => {
                        acc += x;
                        bound[g][r] = acc;
                    }
                    None => bound[g][r] = f64::NEG_INFINITY,
                }
            }
        }
        let mut best: Option<(Vec<u32>, f64)> = None;
        let mut st = self.initial_state();
        if self.viable(&st) {
            self.branch(&mut st, 0.0, gains, &bound, &mut best);
        }
        best
    }

    fn branch(
        &self,
        st: &mut State,
        value: f64,
        gains: &[Vec<f64>],
        bound: &[Vec<f64>],
        best: &mut Option<(Vec<u32>, f64)>,
    ) {
        let g = st.counts.len();
        let need = (self.inst.k() - st.seats) as usize;
        if let Some((_, b)) = best {
            if value + bound[g][need] <= *b + tie_tol(*b) {
                return;
            }
        }
        if g == self.max_seats.len() {
            if need == 0 {
                *best = Some((st.counts.clone(), value));
            }
            return;
        }
        let hi = self.max_seats[g].min(need as u32);
        let base: f64 = gains[g][..self.min_seats[g] as usize].iter().sum();
        let mut v = value + base;
        for c in self.min_seats[g]..=hi {
            if c > self.min_seats[g] {
                v += gains[g][c as usize - 1];
            }
            self.push(st, g, c);
            if self.viable(st) {
                self.branch(st, v, gains, bound, best);
            }
            self.pop(st, g);
        }
    }
}

fn tie_tol(x: f64) -> f64 {
    1e-12 * (1.0 + x.abs())
}
