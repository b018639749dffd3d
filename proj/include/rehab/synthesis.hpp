#pragma once

#include "rehab/constraints.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rehab {

struct PromptTemplate {
  int version = 1;
  std::map<std::string, std::string> sections;  // header, angle, spatial, pacing, footer

  // "[section]" headers, '#' comment lines.
  static PromptTemplate parse(std::string_view text);
  static const PromptTemplate& builtin();
};

struct StopAngle {
  std::string constraint_id;
  double max_angle = 0.0;
  double stop_angle_deg = 0.0;
};

struct SynthesisPrompt {
  std::string text;
  // Cap demonstrated for the first angle constraint; absent for spatial-only sets.
  std::optional<double> stop_angle_deg;
  std::vector<StopAngle> stops;
  std::vector<std::string> constraint_ids;
};

// Demonstrated cap for one limit: max_angle - margin, halved instead when the
// margin would not leave a positive angle.
double stop_angle_for(double max_angle, double safety_margin_deg);

// Throws NoRenderableConstraint.
SynthesisPrompt build_prompt(const ConstraintSet& set, const PromptTemplate& tmpl = PromptTemplate::builtin(),
                             double safety_margin_deg = 1.0);

class SynthesisProvider {
public:
  virtual ~SynthesisProvider() = default;
  virtual std::string name() const = 0;
  // Returns an opaque video reference. May throw ProviderUnavailable.
  virtual std::string generate(const SynthesisPrompt& prompt) = 0;
};

// Deterministic placeholder reference derived from a SHA-256 of the prompt text.
class MockSynthesisProvider final : public SynthesisProvider {
public:
  std::string name() const override { return "mock"; }
  std::string generate(const SynthesisPrompt& prompt) override;
};

std::string sha256_hex(std::string_view data);

// Runs the provider with a deadline. Timeouts and provider failures surface
// as ProviderUnavailable.
std::string synthesize(const SynthesisPrompt& prompt, std::shared_ptr<SynthesisProvider> provider,
                       std::chrono::milliseconds timeout = std::chrono::seconds(60));

}  // namespace rehab
