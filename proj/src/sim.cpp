#include "mcstab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcstab/errors.hpp"

namespace mcstab::sim {

using mcsys::MultiChannelSystem;
using mcsys::TimeDomain;

Trajectory simulate(const ClosedLoop& cl, const Vector& x0, double T, double dt,
                    const Vector& exogenous) {
    if (x0.size() != cl.dimension()) throw InvalidInputError("simulate: x0 dimension mismatch");
    if (cl.domain == TimeDomain::continuous) {
        if (dt <= 0.0) throw InvalidInputError("simulate: dt must be positive");
    } else if (dt != 1.0) {
        throw InvalidInputError("simulate: discrete systems step with dt = 1");
    }
    Vector b = Vector::Zero(cl.dimension());
    if (cl.input_map.cols() > 0) {
        if (exogenous.size() != cl.input_map.cols())
            throw InvalidInputError("simulate: exogenous input dimension mismatch");
        b = cl.input_map * exogenous;
    } else if (exogenous.size() != 0) {
        throw InvalidInputError("simulate: closed loop takes no exogenous input");
    }

    const Index steps = static_cast<Index>(std::llround(T / dt));
    Trajectory traj;
    traj.times.resize(steps + 1);
    traj.states.resize(steps + 1, cl.dimension());

    if (cl.domain == TimeDomain::continuous) {
        const Index d = cl.dimension();
        Matrix aug = Matrix::Zero(d + 1, d + 1);
        aug.topLeftCorner(d, d) = cl.M;
        aug.topRightCorner(d, 1) = b;
        const Matrix E = linmath::matrix_exponential_step(aug, dt);
        const Matrix Phi = E.topLeftCorner(d, d);
        const Vector drift = E.topRightCorner(d, 1);
        Vector x = x0;
        for (Index k = 0; k <= steps; ++k) {
            traj.times(k) = static_cast<double>(k) * dt;
            traj.states.row(k) = x.transpose();
            x = Phi * x + drift;
        }
    } else {
        Vector x = x0;
        for (Index k = 0; k <= steps; ++k) {
            traj.times(k) = static_cast<double>(k);
            traj.states.row(k) = x.transpose();
            x = cl.M * x + b;
        }
    }
    if (!traj.states.allFinite()) throw InvalidInputError("simulate: trajectory diverged to non-finite values");
    return traj;
}

DecayEstimate estimate_decay_rate(const Trajectory& traj) {
    const Index N = traj.times.size();
    if (N < 3) throw InvalidInputError("estimate_decay_rate: trajectory too short");
    const Index start = static_cast<Index>(std::ceil(0.4 * static_cast<double>(N - 1)));
    DecayEstimate out;
    double st = 0, sy = 0, stt = 0, sty = 0;
    Index count = 0;
    for (Index k = start; k < N; ++k) {
        double nrm = traj.states.row(k).norm();
        if (nrm < 1e-300) {
            nrm = 1e-300;
            out.clamped = true;
        }
        const double t = traj.times(k);
        const double y = std::log(nrm);
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
        ++count;
    }
    const double denom = static_cast<double>(count) * stt - st * st;
    if (denom == 0.0) throw InvalidInputError("estimate_decay_rate: degenerate fit window");
    out.rate = (static_cast<double>(count) * sty - st * sy) / denom;
    return out;
}

namespace {

ClosedLoop assemble_observer_based(const MultiChannelSystem& sys,
                                   const synth::DistributedController& ctl) {
    const Index n = sys.n();
    const int m = sys.m();
    const int q = ctl.q;
    const Index nu = ctl.compensator.order();
    const Index dim = n + Index{m} * n + nu;
    const auto nbrs = graphs::neighbor_sets(ctl.graph.graph);

    Matrix sumBF = Matrix::Zero(n, n);
    for (int j = 0; j < m; ++j) sumBF += sys.channels[j].B * ctl.F[j];

    ClosedLoop cl;
    cl.domain = sys.domain;
    cl.M = Matrix::Zero(dim, dim);
    cl.M.topLeftCorner(n, n) = sys.A;
    cl.layout.push_back(extend::StateBlock{"x", 0, 0, 0, n, false});
    for (int i = 0; i < m; ++i) {
        cl.M.block(0, n + Index{i} * n, n, n) = sys.channels[i].B * ctl.F[i];
        cl.layout.push_back(
            extend::StateBlock{"xhat" + std::to_string(i + 1), i + 1, 0, n + Index{i} * n, n, false});
    }
    for (int i = 0; i < m; ++i) {
        const Index r0 = n + Index{i} * n;
        const Matrix KC = ctl.K[i] * sys.channels[i].C;
        cl.M.block(r0, 0, n, n) = -KC;
        cl.M.block(r0, r0, n, n) += sys.A + KC + sumBF;
        for (int j : nbrs[i]) {
            if (j == i + 1) continue;
            const Matrix& Hij = ctl.H.at({i + 1, j});
            cl.M.block(r0, r0, n, n) += Hij;
            cl.M.block(r0, n + Index{j - 1} * n, n, n) -= Hij;
        }
        if (i + 1 == q && nu > 0) cl.M.block(r0, n + Index{m} * n, n, nu) = ctl.compensator.C;
    }
    if (nu > 0) {
        const Index z0 = n + Index{m} * n;
        const Index qq = sys.channels[q - 1].C.rows();
        const Matrix Kbar = ctl.compensator.B.leftCols(qq);
        cl.M.block(z0, 0, nu, n) = -Kbar * sys.channels[q - 1].C;
        cl.M.block(z0, n + Index{q - 1} * n, nu, n) += Kbar * sys.channels[q - 1].C;
        Index col = qq;
        for (int j : nbrs[q - 1]) {
            if (j == q) continue;
            const Matrix Hbar = ctl.compensator.B.middleCols(col, n);
            col += n;
            cl.M.block(z0, n + Index{q - 1} * n, nu, n) += Hbar;
            cl.M.block(z0, n + Index{j - 1} * n, nu, n) -= Hbar;
        }
        cl.M.block(z0, z0, nu, nu) = ctl.compensator.A;
        cl.layout.push_back(extend::StateBlock{"zc", 0, 0, z0, nu, false});
    }

    Index qrows = 0, prows = 0;
    for (const auto& ch : sys.channels) {
        qrows += ch.C.rows();
        prows += ch.B.cols();
    }
    cl.output_map = Matrix::Zero(qrows, dim);
    cl.control_map = Matrix::Zero(prows, dim);
    Index yr = 0, ur = 0;
    for (int i = 0; i < m; ++i) {
        cl.output_map.block(yr, 0, sys.channels[i].C.rows(), n) = sys.channels[i].C;
        yr += sys.channels[i].C.rows();
        cl.control_map.block(ur, n + Index{i} * n, ctl.F[i].rows(), n) = ctl.F[i];
        ur += ctl.F[i].rows();
    }
    cl.input_map.resize(dim, 0);
    return cl;
}

ClosedLoop assemble_observer_free(const MultiChannelSystem& sys,
                                  const synth::DistributedController& ctl) {
    extend::LiftedSystem lift;
    if (sys.domain == TimeDomain::discrete && !ctl.graph.delay.empty()) {
        lift = extend::build_selective_holding_lift(sys, ctl.graph, ctl.ni, ctl.holding);
    } else {
        lift = extend::build_extension(sys, ctl.graph.graph, ctl.ni);
    }
    const Index nb = lift.dimension();
    const Index nu = ctl.compensator.order();
    const int m = sys.m();
    const int q = ctl.q;

    Matrix Ac = lift.system.A;
    for (int i = 0; i < m; ++i)
        Ac += lift.system.channels[i].B * ctl.F[i] * lift.system.channels[i].C;
    const Matrix& Bq = lift.system.channels[q - 1].B;
    const Matrix& Cq = lift.system.channels[q - 1].C;

    ClosedLoop cl;
    cl.domain = sys.domain;
    cl.M = Matrix::Zero(nb + nu, nb + nu);
    cl.M.topLeftCorner(nb, nb) = Ac + Bq * ctl.compensator.D * Cq;
    if (nu > 0) {
        cl.M.topRightCorner(nb, nu) = Bq * ctl.compensator.C;
        cl.M.bottomLeftCorner(nu, nb) = ctl.compensator.B * Cq;
        cl.M.bottomRightCorner(nu, nu) = ctl.compensator.A;
    }
    cl.layout = lift.layout;
    if (nu > 0) cl.layout.push_back(extend::StateBlock{"zc", 0, 0, nb, nu, false});

    const Index n = sys.n();
    Index qrows = 0, prows = 0;
    for (const auto& ch : sys.channels) {
        qrows += ch.C.rows();
        prows += ch.B.cols();
    }
    cl.output_map = Matrix::Zero(qrows, nb + nu);
    cl.control_map = Matrix::Zero(prows, nb + nu);
    Index yr = 0, ur = 0;
    for (int i = 0; i < m; ++i) {
        cl.output_map.block(yr, 0, sys.channels[i].C.rows(), n) = sys.channels[i].C;
        yr += sys.channels[i].C.rows();
        const Index pi = sys.channels[i].B.cols();
        // ubar_i = F_i ybar_i (+ channel controller terms at i = q); u_i is its top block.
        Matrix ubar = ctl.F[i].topRows(pi) * lift.system.channels[i].C;
        Matrix ubar_z = Matrix::Zero(pi, nu);
        if (i + 1 == q && nu > 0) {
            ubar += (ctl.compensator.D * Cq).topRows(pi);
            ubar_z = ctl.compensator.C.topRows(pi);
        }
        cl.control_map.block(ur, 0, pi, nb) = ubar;
        if (nu > 0) cl.control_map.block(ur, nb, pi, nu) = ubar_z;
        ur += pi;
    }
    cl.input_map.resize(nb + nu, 0);
    return cl;
}

}  // namespace

ClosedLoop assemble_closed_loop(const MultiChannelSystem& sys,
                                const synth::DistributedController& ctl) {
    sys.validate();
    if (static_cast<int>(ctl.F.size()) != sys.m())
        throw InvalidInputError("assemble_closed_loop: controller/channel count mismatch");
    if (ctl.kind == synth::DistributedController::Kind::observer_based)
        return assemble_observer_based(sys, ctl);
    return assemble_observer_free(sys, ctl);
}

}  // namespace mcstab::sim
