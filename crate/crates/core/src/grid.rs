/// Uniform sampling window, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub xmin: f64,
    pub xmax: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(xmin: f64, xmax: f64, points: usize) -> Self {
        assert!(points >= 2, "grid needs at least two points");
        assert!(xmax > xmin, "grid needs xmax > xmin");
        Grid { xmin, xmax, points }
    }

    pub fn step(&self) -> f64 {
        (self.xmax - self.xmin) / (self.points - 1) as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..self.points).map(move |k| {
            if k + 1 == self.points {
                self.xmax
            } else {
                self.xmin + h * k as f64
            }
        })
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::new(-5.0, 5.0, 201)
    }
}
