package org.example.config;

import java.util.HashMap;
import java.util.Map;

public final class Settings {

    private static final Map<String, String> VALUES = new HashMap<>();

    static {
        reset();
    }

    private Settings() {
    }

    public static String get(String key) {
        return VALUES.get(key);
    }

    public static void loadProfile(String profile) {
        VALUES.put("mode", profile);
        VALUES.put("level", "debug");
        VALUES.put("name", profile + "-node");
    }

    public static void reset() {
        VALUES.clear();
        VALUES.put("mode", "safe");
        VALUES.put("level", "info");
        VALUES.put("name", "default");
    }
}
