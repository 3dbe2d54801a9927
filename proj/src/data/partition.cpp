// Copyright 2026 The fedmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <numeric>
#include <random>

#include <json.hpp>

#include "fedmix/data.hpp"
#include "fedmix/error.hpp"

namespace fedmix {

namespace {

void canonicalize(PartitionPlan& plan) {
  for (auto& a : plan.assignments) std::ranges::sort(a);
}

}  // namespace

PartitionPlan partition_dirichlet(const Dataset& ds, std::size_t num_clients, double mu,
                                  std::uint64_t seed) {
  if (!ds.labels) throw InvalidInput("partition_dirichlet: dataset has no labels");
  if (num_clients == 0) throw InvalidInput("partition_dirichlet: need at least one client");
  if (!(mu > 0.0)) throw InvalidInput("partition_dirichlet: mu must be positive");
  if (ds.size() < num_clients) {
    throw InvalidInput("partition_dirichlet: " + std::to_string(ds.size()) +
                       " samples cannot cover " + std::to_string(num_clients) + " clients");
  }

  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class.at(static_cast<std::size_t>((*ds.labels)[i])).push_back(i);
  }

  PartitionPlan plan;
  plan.assignments.resize(num_clients);
  plan.mu = mu;
  plan.seed = seed;

  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(mu, 1.0);
  std::vector<double> props(num_clients);
  for (auto& members : by_class) {
    for (double& p : props) p = gamma(rng);
    if (std::accumulate(props.begin(), props.end(), 0.0) <= 0.0) {
      // Every draw underflowed (tiny mu): the whole class goes to one client.
      std::ranges::fill(props, 0.0);
      props[std::uniform_int_distribution<std::size_t>(0, num_clients - 1)(rng)] = 1.0;
    }
    if (members.empty()) continue;
    const auto counts = largest_remainder(members.size(), props);
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < num_clients; ++k) {
      for (std::size_t i = 0; i < counts[k]; ++i) plan.assignments[k].push_back(members[pos++]);
    }
  }

  // Repair empty clients by taking one sample from the currently largest.
  for (std::size_t k = 0; k < num_clients; ++k) {
    if (!plan.assignments[k].empty()) continue;
    auto largest = std::ranges::max_element(
        plan.assignments, [](const auto& a, const auto& b) { return a.size() < b.size(); });
    auto donor = std::ranges::max_element(*largest);
    plan.assignments[k].push_back(*donor);
    largest->erase(donor);
  }
  canonicalize(plan);
  return plan;
}

PartitionPlan partition_iid(std::size_t num_samples, std::size_t num_clients, std::uint64_t seed) {
  if (num_clients == 0) throw InvalidInput("partition_iid: need at least one client");
  if (num_samples < num_clients) {
    throw InvalidInput("partition_iid: " + std::to_string(num_samples) + " samples cannot cover " +
                       std::to_string(num_clients) + " clients");
  }
  std::vector<std::size_t> order(num_samples);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  PartitionPlan plan;
  plan.assignments.resize(num_clients);
  plan.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) plan.assignments[i % num_clients].push_back(order[i]);
  canonicalize(plan);
  return plan;
}

void validate_plan(const PartitionPlan& plan, std::size_t num_samples) {
  std::vector<bool> seen(num_samples, false);
  std::size_t covered = 0;
  for (std::size_t k = 0; k < plan.assignments.size(); ++k) {
    if (plan.assignments[k].empty()) {
      throw InvalidInput("partition plan: client " + std::to_string(k) + " is empty");
    }
    for (std::size_t idx : plan.assignments[k]) {
      if (idx >= num_samples) {
        throw InvalidInput("partition plan: index " + std::to_string(idx) + " out of range");
      }
      if (seen[idx]) throw InvalidInput("partition plan: index " + std::to_string(idx) + " repeated");
      seen[idx] = true;
      ++covered;
    }
  }
  if (covered != num_samples) {
    throw InvalidInput("partition plan: covers " + std::to_string(covered) + " of " +
                       std::to_string(num_samples) + " samples");
  }
}

std::string plan_to_json(const PartitionPlan& plan) {
  nlohmann::json j;
  j["seed"] = plan.seed;
  if (plan.mu) {
    j["mu"] = *plan.mu;
  } else {
    j["mu"] = "iid";
  }
  j["assignments"] = plan.assignments;
  return j.dump();
}

PartitionPlan plan_from_json(const std::string& text) {
  PartitionPlan plan;
  try {
    const auto j = nlohmann::json::parse(text);
    plan.seed = j.at("seed").get<std::uint64_t>();
    const auto& mu = j.at("mu");
    if (mu.is_string()) {
      if (mu.get<std::string>() != "iid") throw FormatError("partition plan: mu must be a number or \"iid\"");
    } else {
      plan.mu = mu.get<double>();
    }
    plan.assignments = j.at("assignments").get<std::vector<std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("partition plan: ") + e.what());
  }
  return plan;
}

}  // namespace fedmix
