package org.example;

import org.apache.logging.log4j.LogManager;
import org.apache.logging.log4j.Logger;

public class Service {
    private static final Logger LOG = LogManager.getLogger(Service.class);

    public void run() {
        LOG.info("running");
    }
}
