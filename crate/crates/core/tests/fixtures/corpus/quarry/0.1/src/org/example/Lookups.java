package org.example;

import org.apache.logging.log4j.core.lookup.JndiLookup;

public class Lookups {
    private final JndiLookup lookup = new JndiLookup();
}
