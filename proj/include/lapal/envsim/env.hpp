#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace lapal::env {

using Vector = Eigen::VectorXd;

struct EnvSpec {
  std::string id;
  int state_dim = 0;
  int action_dim = 0;
  Vector action_low;
  Vector action_high;
  double dt = 0.05;
  int horizon = 50;
  double gamma = 0.99;
};

// Static physical and controller constants of one environment instance.
struct EnvParams {
  enum class Kind { kPointMass, kArm };
  Kind kind = Kind::kArm;

  // Point mass.
  double mass = 0.25;

  // Planar arm: one entry per joint.
  std::vector<double> link_lengths;
  double inertia = 0.1;
  double v_max = 10.0;
  std::vector<double> nominal_angles;
  double init_angle_noise = 0.05;

  double damping = 0.5;  // viscous, both kinds
  double action_bound = 1.0;
  double control_cost = 1e-3;  // w_u

  // Goal annulus (in the upper half plane for arms, full circle for the point mass).
  double goal_r_min = 0.3;
  double goal_r_max = 0.8;
  double goal_angle_min = 0.0;
  double goal_angle_max = 0.0;

  // Scripted expert gains.
  double kp = 1.0;
  double kd = 1.0;
  double joint_damping_gain = 0.0;  // c_d

  double success_radius = 0.05;
};

// Point-mass state layout: [goal - position (2), velocity (2)].
// Planar arm state layout: [angles(K), velocities(K), goal(2)].
struct ArmState {
  Vector joint_angles;
  Vector joint_velocities;
  Eigen::Vector2d goal;
};

struct StepResult {
  Vector next_state;
  double eval_reward = 0.0;
  bool done = false;
  bool clamped = false;  // action was outside bounds and got clamped
};

// Deterministic continuous-control environment. Stepping is a pure function
// of (state, action, step index); instances are immutable after construction.
//
// Supported ids: "pointmass", "arm<K>" (e.g. arm2, arm6, arm10), and
// "arm<K>-perturbed" (alternating +-20% link lengths, doubled joint damping).
class Env {
 public:
  static Env make(const std::string& id);
  Env(EnvSpec spec, EnvParams params);

  const EnvSpec& spec() const { return spec_; }
  const EnvParams& params() const { return params_; }
  std::uint64_t digest() const;

  Vector reset(std::uint64_t seed) const;
  // step_index is the index of the step being taken (0-based); done is set
  // when step_index + 1 == horizon.
  StepResult step(const Vector& state, const Vector& action, int step_index) const;

  // Ground-truth reward of (s, a, s'), evaluation only.
  double eval_reward(const Vector& state, const Vector& action, const Vector& next_state) const;
  // Distance from end effector (or point mass) to goal.
  double goal_distance(const Vector& state) const;

  Vector scripted_expert(const Vector& state) const;
  Vector clamp_action(const Vector& action) const;

  ArmState arm_state(const Vector& state) const;
  int num_joints() const { return static_cast<int>(params_.link_lengths.size()); }

 private:
  void check_state(const Vector& s) const;

  EnvSpec spec_;
  EnvParams params_;
};

// Cumulative-angle planar chain.
Eigen::Vector2d forward_kinematics(const std::vector<double>& lengths, const Vector& angles);
// 2 x K positional Jacobian of forward_kinematics.
Eigen::Matrix<double, 2, Eigen::Dynamic> arm_jacobian(const std::vector<double>& lengths,
                                                      const Vector& angles);

double wrap_angle(double a);  // into (-pi, pi]

}  // namespace lapal::env
