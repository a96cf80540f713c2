#include "tenon/session/codec.hpp"

#include <fstream>
#include <functional>
#include <unordered_map>

#include "tenon/core/hash.hpp"

namespace tenon {

using json = nlohmann::json;

std::string_view to_string(Role r) { return r == Role::kHost ? "Host" : "Client"; }

std::string_view to_string(Zone z) {
  switch (z) {
    case Zone::kSpeechArea: return "SpeechArea";
    case Zone::kModelArea: return "ModelArea";
    case Zone::kCharacterArea: return "CharacterArea";
    case Zone::kVerificationZone: return "VerificationZone";
  }
  return "?";
}

std::string_view to_string(ModelState s) {
  switch (s) {
    case ModelState::kGenerating: return "Generating";
    case ModelState::kUnactivated: return "Unactivated";
    case ModelState::kActivated: return "Activated";
  }
  return "?";
}

std::string_view to_string(CardState s) { return s == CardState::kUnspent ? "Unspent" : "Spent"; }
std::string_view to_string(Media m) { return m == Media::kPng ? "PNG" : "GLB"; }

std::optional<Zone> zone_from_string(std::string_view s) {
  for (auto z : {Zone::kSpeechArea, Zone::kModelArea, Zone::kCharacterArea, Zone::kVerificationZone}) {
    if (to_string(z) == s) return z;
  }
  return std::nullopt;
}

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw CodecError(std::string("expected object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw CodecError(std::string("missing field '") + key + "'");
  return *it;
}

std::string get_str(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw CodecError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

template <typename Id>
Id get_id(const json& j, const char* key) {
  auto s = get_str(j, key);
  if (s.empty()) throw CodecError(std::string("field '") + key + "' must be non-empty");
  return Id(std::move(s));
}

template <typename Id>
std::optional<Id> get_opt_id(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return get_id<Id>(j, key);
}

std::int64_t get_int(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw CodecError(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

double get_num(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number()) throw CodecError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

bool get_bool(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_boolean()) throw CodecError(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::uint64_t get_hex(const json& j, const char* key) {
  auto s = get_str(j, key);
  auto v = from_hex(s);
  if (!v) throw CodecError(std::string("field '") + key + "' must be a hex digest");
  return *v;
}

Zone get_zone(const json& j, const char* key) {
  auto z = zone_from_string(get_str(j, key));
  if (!z) throw CodecError(std::string("field '") + key + "' is not a zone");
  return *z;
}

template <typename E>
E get_enum(const json& j, const char* key, std::initializer_list<E> values) {
  auto s = get_str(j, key);
  for (auto v : values) {
    if (to_string(v) == s) return v;
  }
  throw CodecError(std::string("field '") + key + "' has unknown value '" + s + "'");
}

template <typename Id>
json id_list(const std::vector<Id>& ids) {
  json arr = json::array();
  for (const auto& id : ids) arr.push_back(id.str());
  return arr;
}

template <typename Id>
std::vector<Id> get_id_list(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_array()) throw CodecError(std::string("field '") + key + "' must be an array");
  std::vector<Id> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw CodecError(std::string("field '") + key + "' must hold strings");
    out.emplace_back(e.get<std::string>());
  }
  return out;
}

template <typename T>
json opt(const std::optional<T>& v) {
  if (!v) return nullptr;
  if constexpr (std::is_same_v<T, std::string>) {
    return *v;
  } else if constexpr (std::is_same_v<T, AssetRef>) {
    return asset_to_json(*v);
  } else {
    return v->str();
  }
}

json location_to_json(const Location& loc) {
  if (const auto* z = std::get_if<InZone>(&loc)) return json{{"zone", to_string(z->zone)}};
  return json{{"held_by", std::get<HeldBy>(loc).user.str()}};
}

Location location_from_json(const json& j) {
  if (j.contains("held_by")) return HeldBy{get_id<UserId>(j, "held_by")};
  return InZone{get_zone(j, "zone")};
}

json spawn_to_json(const std::vector<SpawnEntry>& spawn) {
  json arr = json::array();
  for (const auto& s : spawn) arr.push_back({{"part", s.part.str()}, {"count", s.count}});
  return arr;
}

std::vector<SpawnEntry> spawn_from_json(const json& j) {
  if (!j.is_array()) throw CodecError("spawn must be an array");
  std::vector<SpawnEntry> out;
  for (const auto& e : j) {
    auto count = get_int(e, "count");
    if (count < 0) throw CodecError("spawn count must be non-negative");
    out.push_back({get_id<PartId>(e, "part"), static_cast<int>(count)});
  }
  return out;
}

}  // namespace

json asset_to_json(const AssetRef& a) {
  return {{"uri", a.uri}, {"media", to_string(a.media)}, {"digest", to_hex(a.bytes_digest)}};
}

AssetRef asset_from_json(const json& j) {
  return {get_str(j, "uri"), get_enum(j, "media", {Media::kPng, Media::kGlb}), get_hex(j, "digest")};
}

// ---------------------------------------------------------------------------
// World / presence

json world_to_json(const World& w) {
  json users = json::object();
  for (const auto& [id, u] : w.users) {
    users[id.str()] = {{"name", u.display_name},
                       {"role", to_string(u.role)},
                       {"present", u.present},
                       {"joined_seq", u.joined_seq}};
  }
  json instances = json::object();
  for (const auto& [id, i] : w.instances) {
    instances[id.str()] = {{"part", i.part.str()}, {"location", location_to_json(i.location)}};
  }
  json tasks = json::object();
  for (const auto& [id, t] : w.tasks) {
    tasks[id.str()] = {{"ordinal", t.ordinal},
                       {"owner", t.owner.str()},
                       {"raw_text", t.raw_text},
                       {"core_character", opt(t.core_character)},
                       {"image", opt(t.image)},
                       {"model", opt(t.model)},
                       {"card_issued", t.card_issued},
                       {"failed", t.failed},
                       {"failure", t.failure}};
  }
  json cards = json::object();
  for (const auto& [id, c] : w.cards) {
    cards[id.str()] = {{"character", c.character},
                       {"state", to_string(c.state)},
                       {"owner", c.owner.str()},
                       {"task", c.task.str()}};
  }
  json models = json::object();
  for (const auto& [id, m] : w.models) {
    models[id.str()] = {{"task", m.task.str()}, {"asset", opt(m.asset)}, {"state", to_string(m.state)}};
  }
  return {{"session_name", w.session_name},
          {"max_users", w.max_users},
          {"catalog_digest", to_hex(w.catalog_digest)},
          {"users", std::move(users)},
          {"instances", std::move(instances)},
          {"tasks", std::move(tasks)},
          {"cards", std::move(cards)},
          {"models", std::move(models)},
          {"counters",
           {{"next_instance", w.counters.next_instance},
            {"next_task", w.counters.next_task},
            {"next_model", w.counters.next_model},
            {"next_card", w.counters.next_card}}}};
}

World world_from_json(const json& j) {
  World w;
  w.session_name = get_str(j, "session_name");
  w.max_users = static_cast<int>(get_int(j, "max_users"));
  w.catalog_digest = get_hex(j, "catalog_digest");
  for (const auto& [id, u] : field(j, "users").items()) {
    w.users.emplace(UserId(id), UserRecord{UserId(id), get_str(u, "name"),
                                           get_enum(u, "role", {Role::kHost, Role::kClient}),
                                           get_bool(u, "present"),
                                           static_cast<std::uint64_t>(get_int(u, "joined_seq"))});
  }
  for (const auto& [id, i] : field(j, "instances").items()) {
    w.instances.emplace(InstanceId(id), PartInstance{InstanceId(id), get_id<PartId>(i, "part"),
                                                     location_from_json(field(i, "location"))});
  }
  for (const auto& [id, t] : field(j, "tasks").items()) {
    LearningTask task;
    task.id = TaskId(id);
    task.ordinal = static_cast<std::uint64_t>(get_int(t, "ordinal"));
    task.owner = get_id<UserId>(t, "owner");
    task.raw_text = get_str(t, "raw_text");
    if (!field(t, "core_character").is_null()) task.core_character = get_str(t, "core_character");
    if (!field(t, "image").is_null()) task.image = asset_from_json(field(t, "image"));
    task.model = get_opt_id<ModelId>(t, "model");
    task.card_issued = get_bool(t, "card_issued");
    task.failed = get_bool(t, "failed");
    task.failure = get_str(t, "failure");
    w.tasks.emplace(task.id, std::move(task));
  }
  for (const auto& [id, c] : field(j, "cards").items()) {
    w.cards.emplace(CardId(id), RoundCard{CardId(id), get_str(c, "character"),
                                          get_enum(c, "state", {CardState::kUnspent, CardState::kSpent}),
                                          get_id<UserId>(c, "owner"), get_id<TaskId>(c, "task")});
  }
  for (const auto& [id, m] : field(j, "models").items()) {
    ModelEntity model;
    model.id = ModelId(id);
    model.task = get_id<TaskId>(m, "task");
    if (!field(m, "asset").is_null()) model.asset = asset_from_json(field(m, "asset"));
    model.state = get_enum(m, "state",
                           {ModelState::kGenerating, ModelState::kUnactivated, ModelState::kActivated});
    w.models.emplace(model.id, std::move(model));
  }
  const auto& c = field(j, "counters");
  w.counters.next_instance = static_cast<std::uint64_t>(get_int(c, "next_instance"));
  w.counters.next_task = static_cast<std::uint64_t>(get_int(c, "next_task"));
  w.counters.next_model = static_cast<std::uint64_t>(get_int(c, "next_model"));
  w.counters.next_card = static_cast<std::uint64_t>(get_int(c, "next_card"));
  return w;
}

json presence_to_json(const Presence& p) {
  json seqs = json::object();
  for (const auto& [id, s] : p.last_client_seq) seqs[id.str()] = s;
  json poses = json::object();
  for (const auto& [id, pose] : p.poses) poses[id.str()] = {{"x", pose.x}, {"y", pose.y}, {"yaw", pose.yaw}};
  json pose_ms = json::object();
  for (const auto& [id, t] : p.last_pose_ms) pose_ms[id.str()] = t;
  return {{"event_seq", p.event_seq}, {"last_client_seq", seqs}, {"poses", poses}, {"last_pose_ms", pose_ms}};
}

Presence presence_from_json(const json& j) {
  Presence p;
  p.event_seq = static_cast<std::uint64_t>(get_int(j, "event_seq"));
  for (const auto& [id, s] : field(j, "last_client_seq").items()) p.last_client_seq[UserId(id)] = s.get<std::int64_t>();
  for (const auto& [id, pose] : field(j, "poses").items()) {
    p.poses[UserId(id)] = Pose{get_num(pose, "x"), get_num(pose, "y"), get_num(pose, "yaw")};
  }
  for (const auto& [id, t] : field(j, "last_pose_ms").items()) p.last_pose_ms[UserId(id)] = t.get<std::int64_t>();
  return p;
}

// ---------------------------------------------------------------------------
// Commands

std::string_view command_name(const CommandBody& body) {
  return std::visit(
      [](const auto& c) -> std::string_view {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, cmd::Join>) return "Join";
        else if constexpr (std::is_same_v<T, cmd::Leave>) return "Leave";
        else if constexpr (std::is_same_v<T, cmd::Speak>) return "Speak";
        else if constexpr (std::is_same_v<T, cmd::GenerateModel>) return "GenerateModel";
        else if constexpr (std::is_same_v<T, cmd::Grab>) return "Grab";
        else if constexpr (std::is_same_v<T, cmd::Release>) return "Release";
        else if constexpr (std::is_same_v<T, cmd::Splice>) return "Splice";
        else if constexpr (std::is_same_v<T, cmd::PlaceInZone>) return "PlaceInZone";
        else if constexpr (std::is_same_v<T, cmd::ActivateModel>) return "ActivateModel";
        else return "PoseUpdate";
      },
      body);
}

json command_to_json(const CommandBody& body) {
  json j = std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, cmd::Join>) return {{"name", c.name}};
        else if constexpr (std::is_same_v<T, cmd::Leave>) return json::object();
        else if constexpr (std::is_same_v<T, cmd::Speak>) return {{"text", c.text}};
        else if constexpr (std::is_same_v<T, cmd::GenerateModel>) return {{"task_id", c.task_id.str()}};
        else if constexpr (std::is_same_v<T, cmd::Grab>) return {{"instance_id", c.instance_id.str()}};
        else if constexpr (std::is_same_v<T, cmd::Release>) return {{"zone", to_string(c.zone)}};
        else if constexpr (std::is_same_v<T, cmd::Splice>)
          return {{"instance_a", c.instance_a.str()}, {"instance_b", c.instance_b.str()}};
        else if constexpr (std::is_same_v<T, cmd::PlaceInZone>)
          return {{"instance_id", c.instance_id.str()}, {"zone", to_string(c.zone)}};
        else if constexpr (std::is_same_v<T, cmd::ActivateModel>)
          return {{"model_id", c.model_id.str()}, {"card_id", c.card_id.str()}};
        else return {{"x", c.x}, {"y", c.y}, {"yaw", c.yaw}};
      },
      body);
  j["type"] = command_name(body);
  return j;
}

CommandBody command_from_json(const json& j) {
  const auto type = get_str(j, "type");
  if (type == "Join") return cmd::Join{get_str(j, "name")};
  if (type == "Leave") return cmd::Leave{};
  if (type == "Speak") return cmd::Speak{get_str(j, "text")};
  if (type == "GenerateModel") return cmd::GenerateModel{get_id<TaskId>(j, "task_id")};
  if (type == "Grab") return cmd::Grab{get_id<InstanceId>(j, "instance_id")};
  if (type == "Release") return cmd::Release{get_zone(j, "zone")};
  if (type == "Splice") return cmd::Splice{get_id<InstanceId>(j, "instance_a"), get_id<InstanceId>(j, "instance_b")};
  if (type == "PlaceInZone") return cmd::PlaceInZone{get_id<InstanceId>(j, "instance_id"), get_zone(j, "zone")};
  if (type == "ActivateModel") return cmd::ActivateModel{get_id<ModelId>(j, "model_id"), get_id<CardId>(j, "card_id")};
  if (type == "PoseUpdate") return cmd::PoseUpdate{get_num(j, "x"), get_num(j, "y"), get_num(j, "yaw")};
  throw CodecError("unknown command type '" + type + "'");
}

// ---------------------------------------------------------------------------
// Events

std::string_view event_name(const EventBody& body) {
  static constexpr std::string_view kNames[] = {
      "SessionCreated", "UserJoined", "UserLeft", "TaskCreated", "CoreCharacterExtracted",
      "ImageReady", "TaskFailed", "ModelJobStarted", "ModelReady", "Grabbed", "Released",
      "Placed", "SpliceSucceeded", "SpliceRejected", "VerificationSucceeded",
      "VerificationFailed", "CardSpent", "ModelActivated", "PoseUpdated", "Error", "Checkpoint"};
  static_assert(std::size(kNames) == std::variant_size_v<EventBody>);
  return kNames[body.index()];
}

namespace {

json event_payload(const EventBody& body) {
  return std::visit(
      [](const auto& e) -> json {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ev::SessionCreated>) {
          return {{"session_name", e.session_name}, {"max_users", e.max_users},
                  {"spawn", spawn_to_json(e.spawn)}, {"catalog_digest", to_hex(e.catalog_digest)}};
        } else if constexpr (std::is_same_v<T, ev::UserJoined>) {
          return {{"user_id", e.user_id.str()}, {"name", e.name}, {"role", to_string(e.role)}, {"rejoin", e.rejoin}};
        } else if constexpr (std::is_same_v<T, ev::UserLeft>) {
          return {{"user_id", e.user_id.str()}, {"returned", id_list(e.returned)}, {"new_host", opt(e.new_host)}};
        } else if constexpr (std::is_same_v<T, ev::TaskCreated>) {
          return {{"task_id", e.task_id.str()}, {"owner", e.owner.str()}, {"text", e.text}};
        } else if constexpr (std::is_same_v<T, ev::CoreCharacterExtracted>) {
          return {{"task_id", e.task_id.str()}, {"character", e.character}};
        } else if constexpr (std::is_same_v<T, ev::ImageReady>) {
          return {{"task_id", e.task_id.str()}, {"asset", asset_to_json(e.asset)}};
        } else if constexpr (std::is_same_v<T, ev::TaskFailed>) {
          return {{"task_id", e.task_id.str()}, {"stage", e.stage}, {"reason", e.reason}};
        } else if constexpr (std::is_same_v<T, ev::ModelJobStarted>) {
          return {{"model_id", e.model_id.str()}, {"task_id", e.task_id.str()}};
        } else if constexpr (std::is_same_v<T, ev::ModelReady>) {
          return {{"model_id", e.model_id.str()}, {"asset", asset_to_json(e.asset)}};
        } else if constexpr (std::is_same_v<T, ev::Grabbed>) {
          return {{"instance_id", e.instance_id.str()}, {"user_id", e.user_id.str()}};
        } else if constexpr (std::is_same_v<T, ev::Released>) {
          return {{"instance_ids", id_list(e.instance_ids)}, {"zone", to_string(e.zone)}, {"user_id", e.user_id.str()}};
        } else if constexpr (std::is_same_v<T, ev::Placed>) {
          return {{"instance_id", e.instance_id.str()}, {"zone", to_string(e.zone)}, {"user_id", e.user_id.str()}};
        } else if constexpr (std::is_same_v<T, ev::SpliceSucceeded>) {
          return {{"consumed", json::array({e.consumed[0].str(), e.consumed[1].str()})},
                  {"produced", e.produced.str()}, {"part", e.part.str()}, {"user_id", e.user_id.str()}};
        } else if constexpr (std::is_same_v<T, ev::SpliceRejected>) {
          return {{"instance_a", e.instance_a.str()}, {"instance_b", e.instance_b.str()},
                  {"reason", e.reason}, {"user_id", e.user_id.str()}};
        } else if constexpr (std::is_same_v<T, ev::VerificationSucceeded>) {
          return {{"card_id", e.card_id.str()}, {"task_id", e.task_id.str()}, {"instance_id", e.instance_id.str()},
                  {"character", e.character}, {"owner", e.owner.str()}};
        } else if constexpr (std::is_same_v<T, ev::VerificationFailed>) {
          return {{"instance_id", e.instance_id.str()}, {"task_id", opt(e.task_id)}, {"expected", e.expected},
                  {"got", e.got}, {"user_id", e.user_id.str()}};
        } else if constexpr (std::is_same_v<T, ev::CardSpent>) {
          return {{"card_id", e.card_id.str()}};
        } else if constexpr (std::is_same_v<T, ev::ModelActivated>) {
          return {{"model_id", e.model_id.str()}, {"card_id", e.card_id.str()}, {"user_id", e.user_id.str()}};
        } else if constexpr (std::is_same_v<T, ev::PoseUpdated>) {
          return {{"user_id", e.user_id.str()}, {"x", e.pose.x}, {"y", e.pose.y}, {"yaw", e.pose.yaw},
                  {"time_ms", e.time_ms}};
        } else if constexpr (std::is_same_v<T, ev::Error>) {
          return {{"code", e.code}, {"message", e.message}};
        } else {
          static_assert(std::is_same_v<T, ev::Checkpoint>);
          return {{"digest", to_hex(e.digest)}};
        }
      },
      body);
}

using Decoder = std::function<EventBody(const json&)>;

const std::unordered_map<std::string, Decoder>& decoders() {
  static const std::unordered_map<std::string, Decoder> table = {
      {"SessionCreated",
       [](const json& p) -> EventBody {
         return ev::SessionCreated{get_str(p, "session_name"), static_cast<int>(get_int(p, "max_users")),
                                   spawn_from_json(field(p, "spawn")), get_hex(p, "catalog_digest")};
       }},
      {"UserJoined",
       [](const json& p) -> EventBody {
         return ev::UserJoined{get_id<UserId>(p, "user_id"), get_str(p, "name"),
                               get_enum(p, "role", {Role::kHost, Role::kClient}), get_bool(p, "rejoin")};
       }},
      {"UserLeft",
       [](const json& p) -> EventBody {
         return ev::UserLeft{get_id<UserId>(p, "user_id"), get_id_list<InstanceId>(p, "returned"),
                             get_opt_id<UserId>(p, "new_host")};
       }},
      {"TaskCreated",
       [](const json& p) -> EventBody {
         return ev::TaskCreated{get_id<TaskId>(p, "task_id"), get_id<UserId>(p, "owner"), get_str(p, "text")};
       }},
      {"CoreCharacterExtracted",
       [](const json& p) -> EventBody {
         return ev::CoreCharacterExtracted{get_id<TaskId>(p, "task_id"), get_str(p, "character")};
       }},
      {"ImageReady",
       [](const json& p) -> EventBody {
         return ev::ImageReady{get_id<TaskId>(p, "task_id"), asset_from_json(field(p, "asset"))};
       }},
      {"TaskFailed",
       [](const json& p) -> EventBody {
         return ev::TaskFailed{get_id<TaskId>(p, "task_id"), get_str(p, "stage"), get_str(p, "reason")};
       }},
      {"ModelJobStarted",
       [](const json& p) -> EventBody {
         return ev::ModelJobStarted{get_id<ModelId>(p, "model_id"), get_id<TaskId>(p, "task_id")};
       }},
      {"ModelReady",
       [](const json& p) -> EventBody {
         return ev::ModelReady{get_id<ModelId>(p, "model_id"), asset_from_json(field(p, "asset"))};
       }},
      {"Grabbed",
       [](const json& p) -> EventBody {
         return ev::Grabbed{get_id<InstanceId>(p, "instance_id"), get_id<UserId>(p, "user_id")};
       }},
      {"Released",
       [](const json& p) -> EventBody {
         return ev::Released{get_id_list<InstanceId>(p, "instance_ids"), get_zone(p, "zone"),
                             get_id<UserId>(p, "user_id")};
       }},
      {"Placed",
       [](const json& p) -> EventBody {
         return ev::Placed{get_id<InstanceId>(p, "instance_id"), get_zone(p, "zone"), get_id<UserId>(p, "user_id")};
       }},
      {"SpliceSucceeded",
       [](const json& p) -> EventBody {
         auto consumed = get_id_list<InstanceId>(p, "consumed");
         if (consumed.size() != 2) throw CodecError("SpliceSucceeded.consumed must list two instances");
         return ev::SpliceSucceeded{{consumed[0], consumed[1]}, get_id<InstanceId>(p, "produced"),
                                    get_id<PartId>(p, "part"), get_id<UserId>(p, "user_id")};
       }},
      {"SpliceRejected",
       [](const json& p) -> EventBody {
         return ev::SpliceRejected{get_id<InstanceId>(p, "instance_a"), get_id<InstanceId>(p, "instance_b"),
                                   get_str(p, "reason"), get_id<UserId>(p, "user_id")};
       }},
      {"VerificationSucceeded",
       [](const json& p) -> EventBody {
         return ev::VerificationSucceeded{get_id<CardId>(p, "card_id"), get_id<TaskId>(p, "task_id"),
                                          get_id<InstanceId>(p, "instance_id"), get_str(p, "character"),
                                          get_id<UserId>(p, "owner")};
       }},
      {"VerificationFailed",
       [](const json& p) -> EventBody {
         return ev::VerificationFailed{get_id<InstanceId>(p, "instance_id"), get_opt_id<TaskId>(p, "task_id"),
                                       get_str(p, "expected"), get_str(p, "got"), get_id<UserId>(p, "user_id")};
       }},
      {"CardSpent", [](const json& p) -> EventBody { return ev::CardSpent{get_id<CardId>(p, "card_id")}; }},
      {"ModelActivated",
       [](const json& p) -> EventBody {
         return ev::ModelActivated{get_id<ModelId>(p, "model_id"), get_id<CardId>(p, "card_id"),
                                   get_id<UserId>(p, "user_id")};
       }},
      {"PoseUpdated",
       [](const json& p) -> EventBody {
         return ev::PoseUpdated{get_id<UserId>(p, "user_id"),
                                Pose{get_num(p, "x"), get_num(p, "y"), get_num(p, "yaw")}, get_int(p, "time_ms")};
       }},
      {"Error", [](const json& p) -> EventBody { return ev::Error{get_str(p, "code"), get_str(p, "message")}; }},
      {"Checkpoint", [](const json& p) -> EventBody { return ev::Checkpoint{get_hex(p, "digest")}; }},
  };
  return table;
}

}  // namespace

json event_to_json(const Event& e) {
  json payload = event_payload(e.body);
  if (e.issuer) {
    payload["by"] = e.issuer->str();
    payload["cseq"] = e.client_seq;
  }
  return {{"seq", e.seq}, {"type", event_name(e.body)}, {"payload", std::move(payload)}};
}

Event event_from_json(const json& j) {
  Event e;
  const auto seq = get_int(j, "seq");
  if (seq < 1) throw CodecError("event seq must be >= 1");
  e.seq = static_cast<std::uint64_t>(seq);
  const auto type = get_str(j, "type");
  const auto& payload = field(j, "payload");
  auto it = decoders().find(type);
  if (it == decoders().end()) throw CodecError("unknown event type '" + type + "'");
  e.body = it->second(payload);
  if (payload.contains("by")) {
    e.issuer = get_id<UserId>(payload, "by");
    e.client_seq = get_int(payload, "cseq");
  }
  return e;
}

std::string event_line(const Event& event) { return event_to_json(event).dump(); }

Event parse_event_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw CodecError(std::string("malformed event line: ") + e.what());
  }
  return event_from_json(j);
}

// ---------------------------------------------------------------------------
// Session config

SessionConfig session_config_from_json(const json& j) {
  if (!j.is_object()) throw CodecError("session config must be a JSON object");
  SessionConfig c;
  if (auto it = j.find("session_name"); it != j.end()) c.session_name = get_str(j, "session_name");
  if (auto it = j.find("max_users"); it != j.end()) {
    c.max_users = static_cast<int>(get_int(j, "max_users"));
    if (c.max_users < 1) throw CodecError("max_users must be >= 1");
  }
  if (auto it = j.find("spawn"); it != j.end()) c.spawn = spawn_from_json(*it);
  return c;
}

json session_config_to_json(const SessionConfig& c) {
  return {{"session_name", c.session_name}, {"max_users", c.max_users}, {"spawn", spawn_to_json(c.spawn)}};
}

SessionConfig load_session_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open session config " + path);
  try {
    return session_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw CodecError("session config " + path + ": " + e.what());
  }
}

}  // namespace tenon
