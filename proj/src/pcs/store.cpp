#include "jcall/pcs/store.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "jcall/util/log.hpp"

namespace jcall {

const char* to_string(AuthError err) {
  switch (err) {
    case AuthError::UnknownCard: return "unknown card";
    case AuthError::BadPin: return "bad pin";
    case AuthError::NoCredit: return "no credit";
  }
  return "?";
}

const char* to_string(StoreError err) {
  switch (err) {
    case StoreError::FileUnreadable: return "file unreadable";
    case StoreError::MalformedStore: return "malformed store";
    case StoreError::StoreUnavailable: return "store unavailable";
  }
  return "?";
}

Result<SubscriberStore, StoreError> SubscriberStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) return make_err(StoreError::FileUnreadable, path);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto store = from_json(buf.str());
  if (store.ok()) store.value().path_ = path;
  return store;
}

Result<SubscriberStore, StoreError> SubscriberStore::from_json(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    return make_err(StoreError::MalformedStore, "expected a JSON array");
  }
  SubscriberStore store;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("card") || !item.contains("pin") ||
        !item.contains("credit_seconds") || !item["card"].is_string() ||
        !item["pin"].is_string() || !item["credit_seconds"].is_number_integer()) {
      return make_err(StoreError::MalformedStore, "bad subscriber entry");
    }
    SubscriberProfile profile;
    profile.card = item["card"].get<std::string>();
    profile.pin = item["pin"].get<std::string>();
    profile.credit_seconds = item["credit_seconds"].get<std::int64_t>();
    if (item.contains("rate")) {
      if (!item["rate"].is_number_integer() || item["rate"].get<std::int64_t>() < 1) {
        return make_err(StoreError::MalformedStore, "bad rate");
      }
      profile.rate = item["rate"].get<std::int64_t>();
    }
    if (profile.credit_seconds < 0) {
      return make_err(StoreError::MalformedStore, "negative credit");
    }
    store.subscribers_[profile.card] = std::move(profile);
  }
  return store;
}

void SubscriberStore::add(SubscriberProfile profile) {
  subscribers_[profile.card] = std::move(profile);
}

const SubscriberProfile* SubscriberStore::find(const std::string& card) const {
  auto it = subscribers_.find(card);
  return it == subscribers_.end() ? nullptr : &it->second;
}

Result<SubscriberProfile, AuthError> SubscriberStore::authenticate(const std::string& card,
                                                                   const std::string& pin) const {
  const SubscriberProfile* profile = find(card);
  if (!profile) return make_err(AuthError::UnknownCard, card);
  if (profile->pin != pin) return make_err(AuthError::BadPin, card);
  if (profile->credit_seconds <= 0) return make_err(AuthError::NoCredit, card);
  return *profile;
}

Status<StoreError> SubscriberStore::set_credit(const std::string& card,
                                               std::int64_t credit_seconds) {
  auto it = subscribers_.find(card);
  if (it == subscribers_.end()) return ok_unit();
  it->second.credit_seconds = credit_seconds < 0 ? 0 : credit_seconds;
  return persist();
}

std::string SubscriberStore::to_json() const {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& [card, profile] : subscribers_) {
    doc.push_back({{"card", profile.card},
                   {"pin", profile.pin},
                   {"credit_seconds", profile.credit_seconds},
                   {"rate", profile.rate}});
  }
  return doc.dump(2);
}

Status<StoreError> SubscriberStore::persist() const {
  if (path_.empty()) return ok_unit();
  std::ofstream out(path_, std::ios::trunc);
  if (!out) return make_err(StoreError::StoreUnavailable, path_);
  out << to_json() << "\n";
  if (!out) return make_err(StoreError::StoreUnavailable, path_);
  return ok_unit();
}

}  // namespace jcall
