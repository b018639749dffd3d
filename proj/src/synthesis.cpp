#include "rehab/synthesis.hpp"

#include "rehab/data.hpp"
#include "rehab/error.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cstdio>
#include <future>
#include <sstream>
#include <thread>

namespace rehab {

namespace {

std::string human(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

std::string fmt_deg(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fill(std::string s, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string token = "{" + key + "}";
    for (std::size_t pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos + value.size())) {
      s.replace(pos, token.size(), value);
    }
  }
  return s;
}

std::string spatial_cue(std::string_view relation) {
  if (relation == "behind_toe") return "behind the toes, never letting the knee track past the toes";
  return human(relation);
}

std::string section(const PromptTemplate& t, const std::string& name) {
  auto it = t.sections.find(name);
  return it == t.sections.end() ? std::string() : it->second;
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string_view text) {
  PromptTemplate t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string current;
  while (std::getline(in, line)) {
    if (line.starts_with("#")) {
      if (const auto pos = line.find("version"); pos != std::string::npos) {
        t.version = std::atoi(line.c_str() + pos + 7);
      }
      continue;
    }
    if (line.starts_with("[") && line.ends_with("]")) {
      current = line.substr(1, line.size() - 2);
      t.sections[current];
      continue;
    }
    if (current.empty() || line.empty()) continue;
    auto& body = t.sections[current];
    if (!body.empty()) body += ' ';
    body += line;
  }
  return t;
}

const PromptTemplate& PromptTemplate::builtin() {
  static const PromptTemplate t = parse(embedded_data("prompt_template.txt"));
  return t;
}

double stop_angle_for(double max_angle, double safety_margin_deg) {
  const double stop = max_angle - safety_margin_deg;
  return stop > 0.0 ? stop : max_angle / 2.0;
}

SynthesisPrompt build_prompt(const ConstraintSet& set, const PromptTemplate& tmpl, double safety_margin_deg) {
  SynthesisPrompt p;
  std::vector<std::string> parts;
  bool paced = false;

  for (const auto& c : set.constraints) {
    paced = paced || c.max_velocity.has_value();
    if (c.max_angle && c.axis) {
      const double stop = stop_angle_for(*c.max_angle, safety_margin_deg);
      p.stops.push_back({c.constraint_id, *c.max_angle, stop});
      if (!p.stop_angle_deg) p.stop_angle_deg = stop;
      p.constraint_ids.push_back(c.constraint_id);
      parts.push_back(fill(section(tmpl, "angle"), {{"joint", human(c.joint)},
                                                    {"axis", *c.axis},
                                                    {"stop_angle", fmt_deg(stop)},
                                                    {"limit", fmt_deg(*c.max_angle)}}));
    } else if (c.spatial_rel) {
      p.constraint_ids.push_back(c.constraint_id);
      parts.push_back(fill(section(tmpl, "spatial"),
                           {{"joint", human(c.joint)}, {"spatial_cue", spatial_cue(*c.spatial_rel)}}));
    }
  }
  if (p.constraint_ids.empty()) throw NoRenderableConstraint("no angle or spatial constraint to demonstrate");

  std::string text = section(tmpl, "header");
  for (const auto& part : parts) text += (text.empty() ? "" : " ") + part;
  if (paced) text += (text.empty() ? "" : " ") + section(tmpl, "pacing");
  if (const auto footer = section(tmpl, "footer"); !footer.empty()) text += (text.empty() ? "" : " ") + footer;
  p.text = std::move(text);
  return p;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0x0f]);
  }
  return out;
}

std::string MockSynthesisProvider::generate(const SynthesisPrompt& prompt) {
  return "mock://video/" + sha256_hex(prompt.text).substr(0, 16) + ".mp4";
}

std::string synthesize(const SynthesisPrompt& prompt, std::shared_ptr<SynthesisProvider> provider,
                       std::chrono::milliseconds timeout) {
  if (!provider) throw ProviderUnavailable("no synthesis provider configured");
  auto result = std::make_shared<std::promise<std::string>>();
  auto future = result->get_future();
  // Detached so a hung provider cannot block the caller past the deadline;
  // the worker owns everything it touches.
  std::thread([provider, prompt, result] {
    try {
      result->set_value(provider->generate(prompt));
    } catch (...) {
      result->set_exception(std::current_exception());
    }
  }).detach();

  if (future.wait_for(timeout) != std::future_status::ready) {
    throw ProviderUnavailable(provider->name() + " provider timed out after " + std::to_string(timeout.count()) +
                              " ms");
  }
  try {
    return future.get();
  } catch (const ProviderUnavailable&) {
    throw;
  } catch (const std::exception& e) {
    throw ProviderUnavailable(provider->name() + " provider failed: " + e.what());
  }
}

}  // namespace rehab
