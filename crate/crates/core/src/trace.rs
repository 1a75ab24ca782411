//! Per-iteration run records.

/// One row of a run: iteration `k` and the quantities the bounds need.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub k: usize,
    /// Composite objective `F(x_k)`.
    pub f_x: f64,
    /// Composite objective `F(y_k)`; `y_0 = x_0`.
    pub f_y: f64,
    pub alpha: f64,
    /// Partial sum `A_k`.
    pub a_sum: f64,
    pub l_k: Option<f64>,
    pub m_k: Option<u64>,
    pub calls_f: u64,
    pub calls_g: u64,
    /// `V(x*, u_k)` when the optimum is known.
    pub v_to_opt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Ran the requested number of steps.
    Completed,
    /// Stopped once the certified envelope fell below the requested accuracy.
    TargetReached,
    /// The planned step count was zero: `x_0` already satisfies the target.
    AlreadySolved,
    /// The exit test kept passing until `L_k` reached its floor: the model is
    /// exact at the iterate to machine precision, so further steps are no-ops.
    Stationary,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::TargetReached => "target_reached",
            Status::AlreadySolved => "already_solved",
            Status::Stationary => "stationary",
        }
    }
}

/// A run: records, iterate history and per-step bookkeeping.
#[derive(Debug, Clone)]
pub struct Trace {
    pub solver: &'static str,
    pub records: Vec<Record>,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
    pub us: Vec<Vec<f64>>,
    /// Failed trials `j_k` of step `k` (index `k - 1`).
    pub retries: Vec<u32>,
    /// Exit-condition slack accepted at step `k` (index `k - 1`).
    pub slacks: Vec<f64>,
    /// Stochastic draws consumed by step `k`, all retries included.
    pub draws: Vec<u64>,
    pub status: Status,
}

impl Trace {
    pub(crate) fn new(solver: &'static str) -> Self {
        Self {
            solver,
            records: Vec::new(),
            xs: Vec::new(),
            ys: Vec::new(),
            us: Vec::new(),
            retries: Vec::new(),
            slacks: Vec::new(),
            draws: Vec::new(),
            status: Status::Completed,
        }
    }

    /// Number of completed steps.
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("a trace always has the k = 0 record")
    }

    pub fn final_x(&self) -> &[f64] {
        self.xs.last().expect("a trace always has x_0")
    }

    /// `F(x_k) - f*` for every record.
    pub fn gaps(&self, f_star: f64) -> Vec<f64> {
        self.records.iter().map(|r| r.f_x - f_star).collect()
    }

    /// Lengths agree and counters never decrease.
    pub fn is_consistent(&self) -> bool {
        let n = self.records.len();
        let lengths = n >= 1
            && self.xs.len() == n
            && self.ys.len() == n
            && self.us.len() == n
            && self.retries.len() == n - 1
            && self.slacks.len() == n - 1
            && self.draws.len() == n - 1;
        let ordered = self.records.iter().enumerate().all(|(i, r)| r.k == i);
        let monotone = self.records.windows(2).all(|w| {
            w[1].calls_f >= w[0].calls_f && w[1].calls_g >= w[0].calls_g
        });
        lengths && ordered && monotone
    }
}
