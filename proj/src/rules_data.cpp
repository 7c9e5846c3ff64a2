// Built-in detection ruleset. Pattern sources are kept verbatim; do not
// reformat them. Ambiguous rules (service token followed by an arbitrary
// fixed-length body) still load and match, but their hits are excluded by
// the validation cascade.

#include "imgscan/rules.hpp"

namespace imgscan {

namespace {

struct RuleSpec {
    const char* id;
    Domain domain;
    const char* name;
    const char* subordinate;
    const char* pattern;
    SourceTag source;
    bool ambiguous;
    const char* context_prefix;  // nullptr for rules without an env split
    const char* secret_part;     // nullptr -> same as pattern
    int capture_group;           // group holding the secret; 0 = whole match
    std::vector<std::string> fixed_parts;
    std::vector<std::string> prefilter;
    bool prefilter_ci;
};

const RuleSpec kSpecs[] = {
    // --- Private keys -----------------------------------------------------
    {"private-key.pem-private-key", Domain::PrivateKey, "PEM Private Key", "",
     R"rx((?i)-----\s*?BEGIN[ A-Z0-9_-]*?PRIVATE KEY\s*?-----[a-zA-Z0-9\/\n\r=+]*-----\s*?END[ A-Z0-9_-]*? PRIVATE KEY\s*?-----)rx",
     SourceTag::Own, false, nullptr, nullptr, 0, {}, {"private key"}, true},
    {"private-key.pem-private-key-block", Domain::PrivateKey, "PEM Private Key Block", "",
     R"rx((?i)-----\s*?BEGIN[ A-Z0-9_-]*?PRIVATE KEY BLOCK\s*?-----[a-zA-Z0-9\/\n\r=+]*-----\s*?END[ A-Z0-9_-]*? PRIVATE KEY BLOCK\s*?-----)rx",
     SourceTag::Own, false, nullptr, nullptr, 0, {}, {"private key block"}, true},
    {"private-key.pem-pkcs7", Domain::PrivateKey, "PEM PKCS7", "",
     R"rx((?i)-----\s*?BEGIN PKCS7\s*?-----[a-zA-Z0-9\/\n\r=+]*-----\s*?END PKCS7\s*?-----)rx",
     SourceTag::Own, false, nullptr, nullptr, 0, {}, {"pkcs7"}, true},
    {"private-key.xml-private-key", Domain::PrivateKey, "XML Private Key", "",
     R"rx((?i)<(RSAKeyValue|DSAKeyValue|ECKeyValue)>(.|[\n\r])+<(\/RSAKeyValue|\/DSAKeyValue|\/ECKeyValue)>)rx",
     SourceTag::Own, false, nullptr, nullptr, 0, {}, {"keyvalue"}, true},

    // --- API / Cloud ------------------------------------------------------
    {"api-cloud.alibaba", Domain::ApiCloud, "Alibaba", "",
     R"rx(\b(LTAI[a-zA-Z0-9]{17,21})[\"';\s]*)rx", SourceTag::TruffleHog, false, nullptr, nullptr,
     1, {"LTAI"}, {"LTAI"}, false},
    {"api-cloud.amazon-aws", Domain::ApiCloud, "Amazon AWS", "",
     R"rx(\b((?:AKIA|ABIA|ACCA|ASIA)[0-9A-Z]{16})\b)rx", SourceTag::TruffleHog, false, nullptr,
     nullptr, 1, {"AKIA", "ABIA", "ACCA", "ASIA"}, {"AKIA", "ABIA", "ACCA", "ASIA"}, false},
    {"api-cloud.azure", Domain::ApiCloud, "Azure", "",
     R"rx((?i)(client_secret|clientsecret).{0,20}([a-z0-9_\.\-~]{34}))rx", SourceTag::TruffleHog,
     true, R"rx((?i)(?:client_secret|clientsecret))rx", R"rx((?i)([a-z0-9_\.\-~]{34}))rx", 2, {},
     {"client"}, true},
    {"api-cloud.digitalocean", Domain::ApiCloud, "DigitalOcean", "",
     R"rx((?i)(?:digitalocean)(?:.|[\n\r]){0,40}\b([A-Za-z0-9_-]{64})\b)rx", SourceTag::TruffleHog,
     true, R"rx((?i)(?:digitalocean))rx", R"rx((?i)\b([A-Za-z0-9_-]{64})\b)rx", 1, {},
     {"digitalocean"}, true},
    {"api-cloud.github", Domain::ApiCloud, "Github", "",
     R"rx(\b((?:ghp|gho|ghu|ghs|ghr)_[a-zA-Z0-9]{36,255})\b)rx", SourceTag::TruffleHog, false,
     nullptr, nullptr, 1, {"ghp_", "gho_", "ghu_", "ghs_", "ghr_"},
     {"ghp_", "gho_", "ghu_", "ghs_", "ghr_"}, false},
    {"api-cloud.gitlab.v1", Domain::ApiCloud, "Gitlab", "v1",
     R"rx((?i)(?:gitlab)(?:.|[\n\r]){0,40}\b([a-zA-Z0-9\-=_]{20,22})\b)rx", SourceTag::TruffleHog,
     true, R"rx((?i)(?:gitlab))rx", R"rx((?i)\b([a-zA-Z0-9\-=_]{20,22})\b)rx", 1, {}, {"gitlab"},
     true},
    {"api-cloud.gitlab.v2", Domain::ApiCloud, "Gitlab", "v2",
     R"rx(\b(glpat-[a-zA-Z0-9\-=_]{20,22})\b)rx", SourceTag::TruffleHog, false, nullptr, nullptr, 1,
     {"glpat-"}, {"glpat-"}, false},
    {"api-cloud.google-cloud", Domain::ApiCloud, "Google Cloud", "",
     R"rx(\{[^{]+auth_provider_x509_cert_url[^}]+\})rx", SourceTag::Meli, false, nullptr, nullptr,
     0, {"auth_provider_x509_cert_url"}, {"auth_provider_x509_cert_url"}, false},
    {"api-cloud.google-services", Domain::ApiCloud, "Google Services", "",
     R"rx(\bAIza[0-9A-Za-z\-_]{35}\b)rx", SourceTag::Meli, false, nullptr, nullptr, 0, {"AIza"},
     {"AIza"}, false},
    {"api-cloud.heroku", Domain::ApiCloud, "Heroku", "",
     R"rx((?i)(?:heroku)(?:.|[\n\r]){0,40}\b([0-9Aa-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12})\b)rx",
     SourceTag::TruffleHog, false, R"rx((?i)(?:heroku))rx",
     R"rx((?i)\b([0-9Aa-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12})\b)rx", 1, {},
     {"heroku"}, true},
    {"api-cloud.ibm-cloud-identity", Domain::ApiCloud, "IBM Cloud Identity Services", "",
     R"rx((?i)(?:ibm)(?:.|[\n\r]){0,40}\b([A-Za-z0-9_-]{44})\b)rx", SourceTag::TruffleHog, false,
     R"rx((?i)(?:ibm))rx", R"rx((?i)\b([A-Za-z0-9_-]{44})\b)rx", 1, {}, {"ibm"}, true},
    {"api-cloud.login-radius", Domain::ApiCloud, "Login Radius", "",
     R"rx((?i)(?:loginradius)(?:.|[\n\r]){0,40}\b([0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12})\b)rx",
     SourceTag::TruffleHog, true, R"rx((?i)(?:loginradius))rx",
     R"rx((?i)\b([0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12})\b)rx", 1, {},
     {"loginradius"}, true},
    {"api-cloud.mailchimp", Domain::ApiCloud, "MailChimp", "",
     R"rx(\b[0-9a-f]{32}-us[0-9]{1,2}\b)rx", SourceTag::Meli, false, nullptr, nullptr, 0, {"-us"},
     {"-us"}, false},
    {"api-cloud.mailgun", Domain::ApiCloud, "MailGun", "", R"rx(\bkey-[0-9a-zA-Z]{32}\b)rx",
     SourceTag::Meli, false, nullptr, nullptr, 0, {"key-"}, {"key-"}, false},
    {"api-cloud.microsoft-teams", Domain::ApiCloud, "Microsoft Teams", "",
     R"rx((https:\/\/[a-zA-Z-0-9]+\.webhook\.office\.com\/webhookb2\/[a-zA-Z-0-9]{8}-[a-zA-Z-0-9]{4}-[a-zA-Z-0-9]{4}-[a-zA-Z-0-9]{4}-[a-zA-Z-0-9]{12}\@[a-zA-Z-0-9]{8}-[a-zA-Z-0-9]{4}-[a-zA-Z-0-9]{4}-[a-zA-Z-0-9]{4}-[a-zA-Z-0-9]{12}\/IncomingWebhook\/[a-zA-Z-0-9]{32}\/[a-zA-Z-0-9]{8}-[a-zA-Z-0-9]{4}-[a-zA-Z-0-9]{4}-[a-zA-Z-0-9]{4}-[a-zA-Z-0-9]{12}))rx",
     SourceTag::TruffleHog, false, nullptr, nullptr, 1,
     {"https://", ".webhook.office.com/webhookb2/", "/IncomingWebhook/"}, {"webhookb2"}, false},
    {"api-cloud.netlify", Domain::ApiCloud, "Netlify", "",
     R"rx((?i)(?:netlify)(?:.|[\n\r]){0,40}\b([A-Za-z0-9_-]{43,45})\b)rx", SourceTag::TruffleHog,
     true, R"rx((?i)(?:netlify))rx", R"rx((?i)\b([A-Za-z0-9_-]{43,45})\b)rx", 1, {}, {"netlify"},
     true},
    {"api-cloud.twilio", Domain::ApiCloud, "Twilio", "", R"rx(\bSK[0-9a-fA-F]{32}\b)rx",
     SourceTag::Meli, false, nullptr, nullptr, 0, {"SK"}, {"SK"}, false},

    // --- API / Financial --------------------------------------------------
    {"api-financial.amazon-mws", Domain::ApiFinancial, "Amazon MWS", "",
     R"rx(\bamzn\.mws\.[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}\b)rx",
     SourceTag::Meli, false, nullptr, nullptr, 0, {"amzn.mws."}, {"amzn.mws."}, false},
    {"api-financial.bitfinex", Domain::ApiFinancial, "Bitfinex", "",
     R"rx((?i)(?:bitfinex)(?:.|[\n\r]){0,40}\b([A-Za-z0-9_-]{43})\b)rx", SourceTag::TruffleHog,
     true, R"rx((?i)(?:bitfinex))rx", R"rx((?i)\b([A-Za-z0-9_-]{43})\b)rx", 1, {}, {"bitfinex"},
     true},
    {"api-financial.coinbase", Domain::ApiFinancial, "Coinbase", "",
     R"rx((?i)(?:coinbase)(?:.|[\n\r]){0,40}\b([a-zA-Z-0-9]{64})\b)rx", SourceTag::TruffleHog, true,
     R"rx((?i)(?:coinbase))rx", R"rx((?i)\b([a-zA-Z-0-9]{64})\b)rx", 1, {}, {"coinbase"}, true},
    {"api-financial.currency-cloud", Domain::ApiFinancial, "Currency Cloud", "",
     R"rx((?i)(?:currencycloud)(?:.|[\n\r]){0,40}\b([a-zA-Z0-9\-=_]{20,22})\b)rx",
     SourceTag::TruffleHog, true, R"rx((?i)(?:currencycloud))rx",
     R"rx((?i)\b([a-zA-Z0-9\-=_]{20,22})\b)rx", 1, {}, {"currencycloud"}, true},
    {"api-financial.paydirt", Domain::ApiFinancial, "Paydirt", "",
     R"rx((?i)(?:paydirtapp)(?:.|[\n\r]){0,40}\b([a-z0-9]{32})\b)rx", SourceTag::TruffleHog, true,
     R"rx((?i)(?:paydirtapp))rx", R"rx((?i)\b([a-z0-9]{32})\b)rx", 1, {}, {"paydirtapp"}, true},
    {"api-financial.paymo", Domain::ApiFinancial, "Paymo", "",
     R"rx((?i)(?:paymoapp)(?:.|[\n\r]){0,40}\b([a-zA-Z0-9]{44})\b)rx", SourceTag::TruffleHog, true,
     R"rx((?i)(?:paymoapp))rx", R"rx((?i)\b([a-zA-Z0-9]{44})\b)rx", 1, {}, {"paymoapp"}, true},
    {"api-financial.paymongo", Domain::ApiFinancial, "Paymongo", "",
     R"rx((?i)(?:paymongo)(?:.|[\n\r]){0,40}\b([a-zA-Z0-9_]{32})\b)rx", SourceTag::TruffleHog, true,
     R"rx((?i)(?:paymongo))rx", R"rx((?i)\b([a-zA-Z0-9_]{32})\b)rx", 1, {}, {"paymongo"}, true},
    {"api-financial.paypal-braintree", Domain::ApiFinancial, "PayPal Braintree", "",
     R"rx(\baccess_token\$production\$[0-9a-z]{16}\$[0-9a-f]{32}\b)rx", SourceTag::Meli, false,
     nullptr, nullptr, 0, {"access_token$production$"}, {"access_token$"}, false},
    {"api-financial.picatic", Domain::ApiFinancial, "Picatic", "",
     R"rx(\bsk_live_[0-9a-z]{32}\b)rx", SourceTag::Meli, false, nullptr, nullptr, 0, {"sk_live_"},
     {"sk_live_"}, false},
    {"api-financial.stripe.st", Domain::ApiFinancial, "Stripe", "ST",
     R"rx(\bsk_live_[0-9a-zA-Z]{24}\b)rx", SourceTag::Meli, false, nullptr, nullptr, 0,
     {"sk_live_"}, {"sk_live_"}, false},
    {"api-financial.stripe.re", Domain::ApiFinancial, "Stripe", "RE",
     R"rx(\brk_live_[0-9a-zA-Z]{24}\b)rx", SourceTag::Meli, false, nullptr, nullptr, 0,
     {"rk_live_"}, {"rk_live_"}, false},
    {"api-financial.square.at", Domain::ApiFinancial, "Square", "AT",
     R"rx(\bsq0atp-[0-9A-Za-z\-_]{22}\b)rx", SourceTag::Meli, false, nullptr, nullptr, 0,
     {"sq0atp-"}, {"sq0atp-"}, false},
    {"api-financial.square.oa", Domain::ApiFinancial, "Square", "OA",
     R"rx(\bsq0csp-[0-9A-Za-z\-_]{43}\b)rx", SourceTag::Meli, false, nullptr, nullptr, 0,
     {"sq0csp-"}, {"sq0csp-"}, false},
    {"api-financial.ticketmaster", Domain::ApiFinancial, "Ticketmaster", "",
     R"rx((?i)(?:ticketmaster)(?:.|[\n\r]){0,40}\b([a-zA-Z0-9]{32})\b)rx", SourceTag::TruffleHog,
     true, R"rx((?i)(?:ticketmaster))rx", R"rx((?i)\b([a-zA-Z0-9]{32})\b)rx", 1, {},
     {"ticketmaster"}, true},
    {"api-financial.wepay", Domain::ApiFinancial, "WePay", "",
     R"rx((?i)(?:wepay)(?:.|[\n\r]){0,40}\b([a-zA-Z0-9_?]{62})\b)rx", SourceTag::TruffleHog, true,
     R"rx((?i)(?:wepay))rx", R"rx((?i)\b([a-zA-Z0-9_?]{62})\b)rx", 1, {}, {"wepay"}, true},

    // --- API / Social media -----------------------------------------------
    {"api-social.facebook.generic", Domain::ApiSocial, "Facebook", "Key",
     R"rx(\b([A-Za-z0-9_\.]{69}-[A-Za-z0-9_\.]{10})\b)rx", SourceTag::TruffleHog, true, nullptr,
     nullptr, 1, {}, {}, false},
    {"api-social.facebook.access-token", Domain::ApiSocial, "Facebook", "Key",
     R"rx(\bEAACEdEose0cBA[0-9A-Za-z]+\b)rx", SourceTag::Meli, false, nullptr, nullptr, 0,
     {"EAACEdEose0cBA"}, {"EAACEdEose0cBA"}, false},
    {"api-social.twitter", Domain::ApiSocial, "Twitter", "",
     R"rx(\b[1-9][0-9]+-[0-9a-zA-Z]{40}\b)rx", SourceTag::Meli, true, nullptr, nullptr, 0, {}, {},
     false},

    // --- API / IoT ----------------------------------------------------------
    {"api-iot.accuweather", Domain::ApiIot, "Accuweather", "",
     R"rx((?i)(?:accuweather)(?:.|[\n\r]){0,40}([a-z0-9A-Z\%]{35})\b)rx", SourceTag::TruffleHog,
     true, R"rx((?i)(?:accuweather))rx", R"rx((?i)([a-z0-9A-Z\%]{35})\b)rx", 1, {}, {"accuweather"},
     true},
    {"api-iot.adafruit-io", Domain::ApiIot, "Adafruit IO", "",
     R"rx(\b(aio\_[a-zA-Z0-9]{28})\b)rx", SourceTag::TruffleHog, false, nullptr, nullptr, 1,
     {"aio_"}, {"aio_"}, false},
    {"api-iot.openuv", Domain::ApiIot, "OpenUV", "",
     R"rx((?i)(?:openuv)(?:.|[\n\r]){0,40}\b([0-9a-z]{32})\b)rx", SourceTag::TruffleHog, true,
     R"rx((?i)(?:openuv))rx", R"rx((?i)\b([0-9a-z]{32})\b)rx", 1, {}, {"openuv"}, true},
    {"api-iot.tomtom", Domain::ApiIot, "Tomtom", "",
     R"rx((?i)(?:tomtom)(?:.|[\n\r]){0,40}\b([0-9Aa-zA-Z]{32})\b)rx", SourceTag::TruffleHog, true,
     R"rx((?i)(?:tomtom))rx", R"rx((?i)\b([0-9Aa-zA-Z]{32})\b)rx", 1, {}, {"tomtom"}, true},

    // --- Accompanying material ----------------------------------------------
    {"accompanying.pem-certificate", Domain::Accompanying, "PEM Certificate", "",
     R"rx((?i)-----\s*?BEGIN CERTIFICATE\s*?-----[a-zA-Z0-9\/\n\r=+]*-----\s*?END CERTIFICATE\s*?-----)rx",
     SourceTag::Own, false, nullptr, nullptr, 0, {}, {"certificate"}, true},
    {"accompanying.pem-certificate-request", Domain::Accompanying, "PEM Certificate Request", "",
     R"rx((?i)-----\s*?BEGIN CERTIFICATE REQUEST\s*?-----[a-zA-Z0-9\/\n\r=+]*-----\s*?END CERTIFICATE REQUEST\s*?-----)rx",
     SourceTag::Own, false, nullptr, nullptr, 0, {}, {"certificate request"}, true},
    {"accompanying.pem-public-key", Domain::Accompanying, "PEM Public Key", "",
     R"rx((?i)-----\s*?BEGIN[ A-Z0-9_-]*?PUBLIC KEY\s*?-----[a-zA-Z0-9\/\n\r=+]*-----\s*?END[ A-Z0-9_-]*? PUBLIC KEY\s*?-----)rx",
     SourceTag::Own, false, nullptr, nullptr, 0, {}, {"public key"}, true},
    {"accompanying.pem-public-key-block", Domain::Accompanying, "PEM Public Key Block", "",
     R"rx((?i)-----\s*?BEGIN[ A-Z0-9_-]*?PUBLIC KEY BLOCK\s*?-----[a-zA-Z0-9\/\n\r=+]*-----\s*?END[ A-Z0-9_-]*? PUBLIC KEY BLOCK\s*?-----)rx",
     SourceTag::Own, false, nullptr, nullptr, 0, {}, {"public key block"}, true},
    {"accompanying.ssh-host-key", Domain::Accompanying, "SSH Host Key", "",
     R"rx(\bssh-[0-9a-zA-Z]+ AAAA\S+ \S+\b)rx", SourceTag::Own, false, nullptr, nullptr, 0, {},
     {"ssh-"}, false},
};

}  // namespace

std::vector<Rule> builtin_rule_table() {
    std::vector<Rule> rules;
    rules.reserve(std::size(kSpecs));
    for (const auto& spec : kSpecs) {
        Rule r;
        r.id = spec.id;
        r.domain = spec.domain;
        r.name = spec.name;
        r.subordinate = spec.subordinate;
        r.pattern = spec.pattern;
        r.source = spec.source;
        r.ambiguous = spec.ambiguous;
        if (spec.context_prefix) r.context_prefix = spec.context_prefix;
        r.secret_part = spec.secret_part ? spec.secret_part : spec.pattern;
        r.capture_group = spec.capture_group;
        r.fixed_parts = spec.fixed_parts;
        r.prefilter = spec.prefilter;
        r.prefilter_ci = spec.prefilter_ci;
        rules.push_back(std::move(r));
    }
    return rules;
}

}  // namespace imgscan
