#include "recrefine/context.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "recrefine/hashing.hpp"

namespace recrefine {

std::string describe_item(const std::string& item_id, const Catalog& catalog) {
  auto it = catalog.find(item_id);
  if (it == catalog.end() || it->second.title.empty()) return item_id;
  std::string text = it->second.title;
  if (!it->second.attributes.empty()) {
    text += " [";
    for (std::size_t i = 0; i < it->second.attributes.size(); ++i) {
      if (i > 0) text += "; ";
      text += it->second.attributes[i].first + ": " + it->second.attributes[i].second;
    }
    text += "]";
  }
  return text;
}

std::string describe_history(const History& hist, const Catalog& catalog) {
  if (hist.empty()) return "(no interactions)";
  std::string text;
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (i > 0) text += '\n';
    text += std::to_string(i + 1) + ". " + describe_item(hist[i].item_id, catalog) +
            " (rated " + std::to_string(hist[i].rating) + "/5)";
  }
  return text;
}

std::string describe_user_group(const std::vector<History>& users, const Catalog& catalog) {
  if (users.empty()) return "(none)";
  std::string text;
  for (std::size_t u = 0; u < users.size(); ++u) {
    if (u > 0) text += "\n";
    text += "User " + std::to_string(u + 1) + ":\n" + describe_history(users[u], catalog);
  }
  return text;
}

SlotMap user_construction_slots(const LabeledSample& s, const Catalog& catalog) {
  return {{"hist", describe_history(s.hist, catalog)}, {"item", describe_item(s.target_item, catalog)}};
}

SlotMap item_construction_slots(const ItemCentricSample& s, const Catalog& catalog) {
  SlotMap slots = item_entity_slots(s, catalog);
  slots["hist"] = describe_history(s.tar, catalog);
  return slots;
}

SlotMap user_entity_slots(const History& hist, const Catalog& catalog) {
  return {{"hist", describe_history(hist, catalog)}};
}

SlotMap item_entity_slots(const std::string& item_id, const std::vector<History>& pos,
                          const std::vector<History>& neg, const Catalog& catalog) {
  return {{"item", describe_item(item_id, catalog)},
          {"pos", describe_user_group(pos, catalog)},
          {"neg", describe_user_group(neg, catalog)}};
}

SlotMap user_entity_slots(const LabeledSample& s, const Catalog& catalog) {
  return user_entity_slots(s.hist, catalog);
}

SlotMap item_entity_slots(const ItemCentricSample& s, const Catalog& catalog) {
  return item_entity_slots(s.item, s.pos, s.neg, catalog);
}

std::vector<EntityContext> build_entity_contexts(const std::vector<Interaction>& all,
                                                 const std::vector<Interaction>& train,
                                                 const Catalog& catalog,
                                                 const EntityContextOptions& opts,
                                                 std::uint64_t seed) {
  std::set<std::string> users, items;
  for (const auto& x : all) {
    users.insert(x.user_id);
    items.insert(x.item_id);
  }

  std::vector<Interaction> sorted = train;
  std::sort(sorted.begin(), sorted.end(), chronological_less);
  std::map<std::string, History> hist_by_user;
  std::map<std::string, std::map<std::string, int>> raters;  // item -> user -> latest rating
  for (const auto& x : sorted) {
    hist_by_user[x.user_id].push_back({x.item_id, x.rating});
    raters[x.item_id][x.user_id] = x.rating;
  }
  auto recent = [&](const std::string& user, const std::string& exclude) {
    History h;
    auto it = hist_by_user.find(user);
    if (it == hist_by_user.end()) return h;
    for (const auto& r : it->second) {
      if (r.item_id != exclude) h.push_back(r);
    }
    if (h.size() > opts.max_hist) h.erase(h.begin(), h.end() - static_cast<long>(opts.max_hist));
    return h;
  };

  std::vector<EntityContext> out;
  out.reserve(users.size() + items.size());
  for (const auto& user : users) {
    out.push_back({EntityKind::user, user, user_entity_slots(recent(user, ""), catalog)});
  }
  for (const auto& item : items) {
    std::vector<std::string> likers, dislikers;
    if (auto it = raters.find(item); it != raters.end()) {
      for (const auto& [user, rating] : it->second) {
        if (recent(user, item).empty()) continue;
        (opts.rule(rating) == 1 ? likers : dislikers).push_back(user);
      }
    }
    Rng rng(mix64(seed ^ fnv1a64(item)));
    rng.shuffle(likers);
    rng.shuffle(dislikers);
    std::vector<History> pos, neg;
    for (std::size_t i = 0; i < std::min(opts.n_pos, likers.size()); ++i) {
      pos.push_back(recent(likers[i], item));
    }
    for (std::size_t i = 0; i < std::min(opts.n_neg, dislikers.size()); ++i) {
      neg.push_back(recent(dislikers[i], item));
    }
    out.push_back({EntityKind::item, item, item_entity_slots(item, pos, neg, catalog)});
  }
  return out;
}

}  // namespace recrefine
