#include "lapal/envsim/env.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "lapal/common/binary_io.hpp"
#include "lapal/common/errors.hpp"
#include "lapal/common/rng.hpp"

namespace lapal::env {

using std::numbers::pi;

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * pi);  // [-pi, pi]
  if (w <= -pi) w += 2.0 * pi;
  return w;
}

Eigen::Vector2d forward_kinematics(const std::vector<double>& lengths, const Vector& angles) {
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  double cum = 0.0;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    cum += angles(static_cast<Eigen::Index>(i));
    p.x() += lengths[i] * std::cos(cum);
    p.y() += lengths[i] * std::sin(cum);
  }
  return p;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> arm_jacobian(const std::vector<double>& lengths,
                                                      const Vector& angles) {
  const auto k = static_cast<Eigen::Index>(lengths.size());
  // Column j: derivative wrt theta_j = sum over links i >= j of l_i (-sin, cos)(phi_i).
  std::vector<double> cum(k);
  double c = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) cum[i] = (c += angles(i));
  Eigen::Matrix<double, 2, Eigen::Dynamic> jac(2, k);
  double sx = 0.0, sy = 0.0;
  for (Eigen::Index i = k - 1; i >= 0; --i) {
    sx += -lengths[i] * std::sin(cum[i]);
    sy += lengths[i] * std::cos(cum[i]);
    jac(0, i) = sx;
    jac(1, i) = sy;
  }
  return jac;
}

namespace {

EnvParams pointmass_params() {
  EnvParams p;
  p.kind = EnvParams::Kind::kPointMass;
  p.mass = 0.25;
  p.damping = 0.5;
  p.goal_r_min = 0.2;
  p.goal_r_max = 1.0;
  p.goal_angle_min = -pi;
  p.goal_angle_max = pi;
  p.kp = 2.0;
  p.kd = 0.6;
  return p;
}

EnvParams arm_params(int k) {
  EnvParams p;
  p.kind = EnvParams::Kind::kArm;
  p.link_lengths.assign(k, 1.0 / k);
  // Arc-shaped rest pose: base along +x, remaining joints share a total bend.
  const double bend = 0.75 * pi;
  p.nominal_angles.assign(k, bend / k);
  p.nominal_angles[0] = 0.0;
  p.inertia = 0.1;
  p.damping = 0.2;
  p.goal_r_min = 0.3;
  p.goal_r_max = 0.8;
  p.goal_angle_min = 0.15 * pi;
  p.goal_angle_max = 0.85 * pi;
  p.kp = 4.0;
  p.kd = 0.3;
  p.joint_damping_gain = 0.05;
  return p;
}

}  // namespace

Env Env::make(const std::string& id) {
  EnvSpec spec;
  spec.id = id;
  spec.dt = 0.05;
  spec.horizon = 50;
  spec.gamma = 0.99;
  if (id == "pointmass") {
    spec.state_dim = 4;
    spec.action_dim = 2;
    EnvParams p = pointmass_params();
    spec.action_low = Vector::Constant(2, -p.action_bound);
    spec.action_high = Vector::Constant(2, p.action_bound);
    return Env(spec, p);
  }
  const std::string suffix = "-perturbed";
  std::string base = id;
  bool perturbed = false;
  if (base.size() > suffix.size() && base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
    perturbed = true;
    base.resize(base.size() - suffix.size());
  }
  if (base.rfind("arm", 0) == 0 && base.size() > 3) {
    int k = 0;
    try {
      std::size_t used = 0;
      k = std::stoi(base.substr(3), &used);
      if (used != base.size() - 3) k = 0;
    } catch (const std::exception&) {
      k = 0;
    }
    if (k >= 1 && k <= 64) {
      EnvParams p = arm_params(k);
      if (perturbed) {
        for (int i = 0; i < k; ++i) p.link_lengths[i] *= (i % 2 == 0) ? 1.2 : 0.8;
        p.damping *= 2.0;
      }
      spec.state_dim = 2 * k + 2;
      spec.action_dim = k;
      spec.action_low = Vector::Constant(k, -p.action_bound);
      spec.action_high = Vector::Constant(k, p.action_bound);
      return Env(spec, p);
    }
  }
  throw ConfigError("unknown env id '" + id + "'");
}

Env::Env(EnvSpec spec, EnvParams params) : spec_(std::move(spec)), params_(std::move(params)) {
  if ((spec_.action_low.array() >= spec_.action_high.array()).any()) {
    throw ConfigError("action_low must be below action_high");
  }
}

std::uint64_t Env::digest() const {
  BinaryWriter w;
  w.str(spec_.id);
  w.u32(static_cast<std::uint32_t>(spec_.state_dim));
  w.u32(static_cast<std::uint32_t>(spec_.action_dim));
  w.f64(spec_.dt);
  w.u32(static_cast<std::uint32_t>(spec_.horizon));
  for (double l : params_.link_lengths) w.f64(l);
  w.f64(params_.mass);
  w.f64(params_.inertia);
  w.f64(params_.damping);
  w.f64(params_.kp);
  w.f64(params_.kd);
  w.f64(params_.joint_damping_gain);
  return fnv1a(w.data());
}

void Env::check_state(const Vector& s) const {
  if (s.size() != spec_.state_dim) {
    throw ConfigError("state has dimension " + std::to_string(s.size()) + ", env " + spec_.id +
                      " expects " + std::to_string(spec_.state_dim));
  }
  if (!s.allFinite()) throw NumericError("environment fault: non-finite state");
}

Vector Env::reset(std::uint64_t seed) const {
  Rng rng(mix_seed(seed ^ 0x5eedULL));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  // Uniform over the annulus sector area.
  const double r2min = params_.goal_r_min * params_.goal_r_min;
  const double r2max = params_.goal_r_max * params_.goal_r_max;
  const double r = std::sqrt(r2min + (r2max - r2min) * uni(rng));
  const double ang =
      params_.goal_angle_min + (params_.goal_angle_max - params_.goal_angle_min) * uni(rng);
  const Eigen::Vector2d goal(r * std::cos(ang), r * std::sin(ang));

  Vector s = Vector::Zero(spec_.state_dim);
  if (params_.kind == EnvParams::Kind::kPointMass) {
    s.head<2>() = goal;  // mass starts at the origin
    return s;
  }
  const int k = num_joints();
  for (int i = 0; i < k; ++i) {
    const double noise = params_.init_angle_noise * (2.0 * uni(rng) - 1.0);
    s(i) = wrap_angle(params_.nominal_angles[i] + noise);
  }
  s.segment(2 * k, 2) = goal;
  return s;
}

Vector Env::clamp_action(const Vector& action) const {
  return action.cwiseMax(spec_.action_low).cwiseMin(spec_.action_high);
}

ArmState Env::arm_state(const Vector& s) const {
  const int k = num_joints();
  return ArmState{s.head(k), s.segment(k, k), s.segment<2>(2 * k)};
}

double Env::goal_distance(const Vector& s) const {
  if (params_.kind == EnvParams::Kind::kPointMass) return s.head<2>().norm();
  const ArmState a = arm_state(s);
  return (forward_kinematics(params_.link_lengths, a.joint_angles) - a.goal).norm();
}

double Env::eval_reward(const Vector& /*state*/, const Vector& action,
                        const Vector& next_state) const {
  return -goal_distance(next_state) - params_.control_cost * action.squaredNorm();
}

StepResult Env::step(const Vector& state, const Vector& action, int step_index) const {
  check_state(state);
  if (action.size() != spec_.action_dim) throw ConfigError("action dimension mismatch");
  if (!action.allFinite()) throw NumericError("environment fault: non-finite action");
  StepResult out;
  const Vector a = clamp_action(action);
  out.clamped = (a.array() != action.array()).any();
  const double dt = spec_.dt;
  Vector next = state;
  if (params_.kind == EnvParams::Kind::kPointMass) {
    const Eigen::Vector2d vel = state.segment<2>(2);
    const Eigen::Vector2d v_next = vel + dt * (a.head<2>() - params_.damping * vel) / params_.mass;
    next.head<2>() = state.head<2>() - dt * v_next;  // relative goal shrinks as the mass moves
    next.segment<2>(2) = v_next;
  } else {
    const int k = num_joints();
    for (int i = 0; i < k; ++i) {
      const double w = state(k + i);
      const double acc = (a(i) - params_.damping * w) / params_.inertia;
      const double w_next = std::clamp(w + dt * acc, -params_.v_max, params_.v_max);
      next(k + i) = w_next;
      next(i) = wrap_angle(state(i) + dt * w_next);
    }
  }
  out.eval_reward = eval_reward(state, a, next);
  out.next_state = std::move(next);
  out.done = step_index + 1 >= spec_.horizon;
  return out;
}

Vector Env::scripted_expert(const Vector& s) const {
  check_state(s);
  Vector tau;
  if (params_.kind == EnvParams::Kind::kPointMass) {
    tau = params_.kp * s.head<2>() - params_.kd * s.segment<2>(2);
  } else {
    const ArmState a = arm_state(s);
    const auto jac = arm_jacobian(params_.link_lengths, a.joint_angles);
    const Eigen::Vector2d ee = forward_kinematics(params_.link_lengths, a.joint_angles);
    const Eigen::Vector2d ee_vel = jac * a.joint_velocities;
    const Eigen::Vector2d force = params_.kp * (a.goal - ee) - params_.kd * ee_vel;
    tau = jac.transpose() * force - params_.joint_damping_gain * a.joint_velocities;
  }
  return clamp_action(tau);
}

}  // namespace lapal::env
