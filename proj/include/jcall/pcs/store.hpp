#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "jcall/util/result.hpp"

namespace jcall {

struct SubscriberProfile {
  std::string card;
  std::string pin;
  std::int64_t credit_seconds = 0;
  std::int64_t rate = 1;
};

enum class AuthError { UnknownCard, BadPin, NoCredit };
const char* to_string(AuthError err);

enum class StoreError { FileUnreadable, MalformedStore, StoreUnavailable };
const char* to_string(StoreError err);

/// Subscriber records keyed by card number. File-backed stores write every
/// credit update straight back to disk; the narrow surface keeps a real
/// database client swappable for the JSON file.
class SubscriberStore {
public:
  SubscriberStore() = default;

  static Result<SubscriberStore, StoreError> load(const std::string& path);
  static Result<SubscriberStore, StoreError> from_json(const std::string& text);

  void add(SubscriberProfile profile);
  const SubscriberProfile* find(const std::string& card) const;

  Result<SubscriberProfile, AuthError> authenticate(const std::string& card,
                                                    const std::string& pin) const;

  Status<StoreError> set_credit(const std::string& card, std::int64_t credit_seconds);

  std::string to_json() const;
  std::size_t size() const { return subscribers_.size(); }

private:
  Status<StoreError> persist() const;

  std::map<std::string, SubscriberProfile> subscribers_;
  std::string path_;
};

}  // namespace jcall
