// Error taxonomy. The CLI maps these onto its exit-code contract:
// config_error -> 2, backend_error (and capability_error) -> 3, data_error -> 4.
#pragma once

#include <stdexcept>
#include <string>

namespace uqgen {

class error : public std::runtime_error {
  public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

class config_error : public error {
  public:
    explicit config_error(const std::string& what) : error(what) {}
};

class backend_error : public error {
  public:
    explicit backend_error(const std::string& what, bool retriable = false)
        : error(what), retriable_(retriable) {}
    bool retriable() const { return retriable_; }

  private:
    bool retriable_;
};

// A backend exists but cannot serve the request (no logprobs, no forced prefix, ...).
class capability_error : public backend_error {
  public:
    explicit capability_error(const std::string& what) : backend_error(what, false) {}
};

class data_error : public error {
  public:
    explicit data_error(const std::string& what, long line = -1) : error(what), line_(line) {}
    long line() const { return line_; }

  private:
    long line_;
};

// Statistic is undefined on the given input (constant series, single-class labels).
// Reports render these as N/A, never as 0.
class stat_error : public error {
  public:
    explicit stat_error(const std::string& what) : error(what) {}
};

class provider_error : public error {
  public:
    provider_error(const std::string& what, std::string provider_id, bool retriable = true)
        : error(what), provider_id_(std::move(provider_id)), retriable_(retriable) {}
    const std::string& provider_id() const { return provider_id_; }
    bool retriable() const { return retriable_; }

  private:
    std::string provider_id_;
    bool retriable_;
};

} // namespace uqgen
