#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trialdesign/domain.hpp"
#include "trialdesign/errors.hpp"

namespace testing_support {

/// The DesignError thrown by `f`, if any.
template <class F>
std::optional<trialdesign::DesignError> error_of(F&& f) {
  try {
    f();
  } catch (const trialdesign::DesignError& e) {
    return e;
  }
  return std::nullopt;
}

template <class F>
std::optional<trialdesign::ErrorKind> kind_of(F&& f) {
  auto e = error_of(std::forward<F>(f));
  if (!e) return std::nullopt;
  return e->kind();
}

inline trialdesign::UnitRecord trial_unit(trialdesign::LevelIndex x, int t, double y, std::string id = "") {
  return {std::move(id), 1, t, x, y};
}

inline trialdesign::Allocation alloc(std::vector<double> w) {
  auto d = trialdesign::CovariateDomain::ordinal(w.size());
  return trialdesign::Allocation(std::move(d), std::move(w));
}

inline trialdesign::SigmaProfile sigma(std::vector<double> s) {
  auto d = trialdesign::CovariateDomain::ordinal(s.size());
  return trialdesign::SigmaProfile(std::move(d), std::move(s));
}

}  // namespace testing_support
